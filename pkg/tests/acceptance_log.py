"""One pass/fail line per acceptance criterion, echoed at the end of the run."""

import sys

RESULTS = {}


def record(number, title, ok, detail=""):
    line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    RESULTS[number] = line
    print(line, file=sys.__stdout__, flush=True)
    return ok
