"""Command-line front end.

Subcommands ``simulate``, ``fit``, ``study``, ``icecore`` and ``bench``.
Settings come from an optional JSON document (``--config``) whose sections
are named after the subcommands; any field can be overridden with a dotted
flag such as ``--study.h-values=0.01,0.02``.

Exit codes: 0 success, 2 invalid input, 3 estimation failure, 4 I/O error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import InvalidInputError, PearsonSplittingError
from .estimators import MODELS, ObservationSet, param_names
from .harness import (
    SCHEMA_VERSION,
    fit_dataset,
    icecore_fit,
    paper_scale_overrides,
    params_from_fields,
    resolve_study_config,
    run_study,
    simulate_model,
)
from .models.kramers import SK_INIT, SK_TRUE
from .models.wright_fisher import WF_INIT_NATURAL, WF_TRUE_NATURAL, wf_natural_to_reduced
from .optimize import OptSchedule
from .simulate import read_path_csv, subsample, write_path_csv

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ESTIMATION = 3
EXIT_IO = 4

SIMULATE_DEFAULTS = {
    "sk": {"model": "sk", "theta": SK_TRUE.to_fields(), "T": 50.0, "h_sim": 1e-4, "h": 0.001,
           "x0": [0.0, 0.0], "seed": 0},
    "wf": {"model": "wf", "theta": wf_natural_to_reduced(WF_TRUE_NATURAL).to_fields(), "T": 20.0,
           "h_sim": 1e-4, "h": 0.2, "x0": [0.25, 0.25, 0.25], "seed": 0},
}


class UsageError(Exception):
    pass


def parse_value(text):
    """JSON scalars and lists, comma-separated lists, otherwise the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [parse_value(part) for part in text.split(",") if part != ""]
    return text


def parse_overrides(tokens):
    """Turn ``--a.b-c=v`` (or ``--a.b-c v``) tokens into ``{"a": {"b_c": v}}``."""
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or "." not in tok.split("=", 1)[0]:
            raise UsageError(f"unrecognized argument {tok!r}")
        if "=" in tok:
            key, text = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise UsageError(f"missing value for {tok!r}")
            key, text = tok[2:], tokens[i + 1]
            i += 2
        parts = [p.replace("-", "_") for p in key.split(".")]
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = parse_value(text)
    return out


def deep_merge(base, override):
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(args, extra):
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"config is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise InvalidInputError("config must be a JSON object")
    return deep_merge(cfg, parse_overrides(extra))


def _section(cfg, name):
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        raise InvalidInputError(f"config section {name!r} must be an object")
    return value


def _write_json(filename, obj):
    with open(filename, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _ensure_out(out):
    os.makedirs(out, exist_ok=True)
    return out


def _theta_from(model, value, default):
    """Parameter vector from a field map, a list, or the default."""
    if value is None:
        if default is None:
            raise InvalidInputError(f"an initial parameter vector is required for model {model!r}")
        return np.asarray(default, dtype=float)
    if isinstance(value, dict):
        return params_from_fields(model, value).to_vector()
    theta = np.asarray(value, dtype=float).ravel()
    if theta.size != len(param_names(model)):
        raise InvalidInputError(f"model {model!r} has {len(param_names(model))} parameters, got {theta.size}")
    return theta


def cmd_simulate(args, cfg):
    sec = _section(cfg, "simulate")
    model = args.model or sec.get("model", "sk")
    if model not in SIMULATE_DEFAULTS:
        raise InvalidInputError(f"cannot simulate model {model!r}")
    sec = deep_merge(SIMULATE_DEFAULTS[model], {k: v for k, v in sec.items() if k != "model"})
    if args.seed is not None:
        sec["seed"] = args.seed
    params = params_from_fields(model, sec["theta"])
    factor = sec["h"] / sec["h_sim"]
    if abs(factor - round(factor)) > 1e-9 * factor or round(factor) < 1:
        raise InvalidInputError("observation step must be a multiple of the simulation step")
    fine = simulate_model(model, params, sec["T"], sec["h_sim"], sec["x0"], int(sec["seed"]))
    path = subsample(fine, int(round(factor)))
    out = _ensure_out(args.out)
    filename = os.path.join(out, f"{model}_path.csv")
    meta = {"schema": SCHEMA_VERSION, "config": sec, "seed": int(sec["seed"]),
            "params": params.to_fields(), "h": path.h, "N": path.n}
    write_path_csv(path, filename, meta)
    print(filename)
    return EXIT_OK


def cmd_fit(args, cfg):
    sec = _section(cfg, "fit")
    model = args.model or sec.get("model")
    estimator = args.estimator or sec.get("estimator", "ss")
    data_file = args.data or sec.get("data")
    if model not in MODELS:
        raise InvalidInputError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    if not data_file:
        raise InvalidInputError("a data file is required")
    path = read_path_csv(data_file)
    dims = {"sk": 2, "wf": 3, "ou": 1}
    if path.d != dims[model]:
        raise InvalidInputError(f"model {model!r} expects {dims[model]} state columns, found {path.d}")
    data = ObservationSet.from_path(path)
    defaults = {"sk": SK_INIT.to_vector(), "wf": wf_natural_to_reduced(WF_INIT_NATURAL).to_vector(), "ou": None}
    init_value = json.loads(args.theta_init) if args.theta_init else sec.get("theta_init")
    theta_init = _theta_from(model, init_value, defaults[model])
    schedule_cfg = sec.get("schedule")
    schedule = OptSchedule.from_dict(schedule_cfg) if schedule_cfg else OptSchedule.lbfgs()
    result = fit_dataset(model, estimator, data, theta_init, schedule)
    report = result.to_dict()
    if not args.record_time:
        # wall-clock varies between runs; keep the default report reproducible
        report.pop("wall_clock")
    report.update({
        "schema": SCHEMA_VERSION,
        "kind": "fit",
        "model": model,
        "estimator": estimator,
        "param_names": param_names(model),
        "estimates": dict(zip(param_names(model), report["theta_hat"])),
        "N": data.n,
        "h": data.h,
        "config": {"data": os.path.abspath(data_file), "theta_init": [float(v) for v in theta_init],
                   "schedule": schedule.to_dict()},
    })
    out = _ensure_out(args.out)
    filename = os.path.join(out, f"fit_{model}_{estimator}.json")
    _write_json(filename, report)
    print(filename)
    return EXIT_OK if result.converged else EXIT_ESTIMATION


def _study_config(args, cfg):
    sec = dict(_section(cfg, "study"))
    if args.seed is not None:
        sec["base_seed"] = args.seed
    if args.model:
        sec["model"] = args.model
    if args.paper_scale:
        sec = deep_merge(sec, paper_scale_overrides(sec.get("model", "sk")))
    return resolve_study_config(sec)


def write_replication_csv(filename, report):
    names = report["param_names"]
    key = "normalized_error" if report["error_scale"] == "normalized" else "error"
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication", "estimator", "h", "param", "error", "wall_clock", "status"])
        for row in report["replications"]:
            for name, err in zip(names, row[key]):
                w.writerow([row["replication"], row["estimator"], repr(row["h"]), name, repr(err),
                            repr(row["wall_clock"]), row["status"]])


def write_timing_csv(filename, report):
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "h", "median_wall_clock", "runs"])
        for agg in report["aggregates"]:
            w.writerow([agg["estimator"], repr(agg["h"]), repr(agg.get("median_wall_clock_retained")),
                        len(agg.get("retained", []))])


def cmd_study(args, cfg):
    study_cfg = _study_config(args, cfg)
    report, _ = run_study(study_cfg, workers=args.workers)
    out = _ensure_out(args.out)
    model = study_cfg["model"]
    _write_json(os.path.join(out, f"study_{model}.json"), report)
    write_replication_csv(os.path.join(out, f"study_{model}_replications.csv"), report)
    for agg in report["aggregates"]:
        print(f"{agg['estimator']:>3} h={agg['h']:<6g} converged {agg['converged']}/{agg['replications']}"
              f" outliers {agg['outliers']} ({agg['outlier_percent']:.1f}%)")
    print(os.path.join(out, f"study_{model}.json"))
    return EXIT_OK


def cmd_bench(args, cfg):
    sec = _section(cfg, "bench") or _section(cfg, "study")
    study_cfg = _study_config(args, {"study": sec})
    report, _ = run_study(study_cfg, workers=args.workers, with_sd=False)
    out = _ensure_out(args.out)
    model = study_cfg["model"]
    filename = os.path.join(out, f"bench_{model}.csv")
    write_timing_csv(filename, report)
    _write_json(os.path.join(out, f"bench_{model}.json"), {
        "schema": SCHEMA_VERSION, "kind": "bench", "config": study_cfg,
        "timings": [{k: agg.get(k) for k in ("estimator", "h", "median_wall_clock_retained", "median_wall_clock")}
                    for agg in report["aggregates"]],
    })
    print(filename)
    return EXIT_OK


def cmd_icecore(args, cfg):
    sec = _section(cfg, "icecore")
    data_file = args.data or sec.get("data")
    variants = [args.variant] if args.variant else sec.get("variants", ["m1", "m2", "m3"])
    if isinstance(variants, str):
        variants = [variants]
    if not data_file:
        raise InvalidInputError("a data file is required")
    path = read_path_csv(data_file)
    if path.d != 1:
        raise InvalidInputError("the ice-core command expects two columns: t,x")
    theta_init = sec.get("theta_init")
    if theta_init is not None:
        theta_init = _theta_from("sk", theta_init, None)
    schedule_cfg = sec.get("schedule")
    schedule = OptSchedule.from_dict(schedule_cfg) if schedule_cfg else OptSchedule.lbfgs()
    fits = []
    all_converged = True
    for variant in variants:
        result, fit = icecore_fit(path.states[:, 0], path.h, variant, theta_init, schedule)
        all_converged &= fit.converged
        fits.append(result)
        print(f"{variant}: NLL {result['nll']:.3f} converged={result['converged']}")
    out = _ensure_out(args.out)
    filename = os.path.join(out, "icecore.json")
    _write_json(filename, {
        "schema": SCHEMA_VERSION, "kind": "icecore",
        "config": {"data": os.path.abspath(data_file), "variants": variants,
                   "theta_init": None if theta_init is None else [float(v) for v in theta_init],
                   "schedule": schedule.to_dict()},
        "fits": fits,
    })
    print(filename)
    return EXIT_OK if all_converged else EXIT_ESTIMATION


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration document")
    common.add_argument("--seed", type=int, help="random seed (base seed for studies)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="parallel replications")
    common.add_argument("--paper-scale", action="store_true", help="use 1000 replications")

    parser = argparse.ArgumentParser(prog="pearson-splitting", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate and subsample a path")
    p.add_argument("--model", choices=("sk", "wf"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit one dataset")
    p.add_argument("--data", help="path CSV with columns t,x1,...")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--estimator", choices=("ss", "em", "ga", "ll", "exact"))
    p.add_argument("--theta-init", help="JSON list or field map")
    p.add_argument("--record-time", action="store_true", help="include wall-clock in the report")
    p.set_defaults(func=cmd_fit)

    for name, func, text in (("study", cmd_study, "replicated simulation study"),
                             ("bench", cmd_bench, "median estimation times")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--model", choices=("sk", "wf"))
        p.set_defaults(func=func)

    p = sub.add_parser("icecore", parents=[common], help="nested oscillator fits to a t,x series")
    p.add_argument("--data", help="CSV with columns t,x")
    p.add_argument("--variant", choices=("m1", "m2", "m3"))
    p.set_defaults(func=cmd_icecore)
    return parser


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = load_config(args, extra)
        return args.func(args, cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PearsonSplittingError as exc:
        print(f"estimation failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
