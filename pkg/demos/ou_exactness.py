"""Splitting and local linearization reproduce the exact OU likelihood; Euler does not.

Run: python3 demos/ou_exactness.py
"""

import numpy as np

from pearson_splitting.estimators import ObservationSet, make_objective
from pearson_splitting.optimize import OptSchedule, QuasiNewtonPhase, minimize
from pearson_splitting.simulate import make_rng


def exact_ou_path(lam, m, sigma, h, n, seed):
    rng = make_rng(seed)
    decay = np.exp(-lam * h)
    sd = sigma * np.sqrt((1 - decay ** 2) / (2 * lam))
    x = np.empty(n + 1)
    x[0] = m
    for k in range(n):
        x[k + 1] = m + (x[k] - m) * decay + sd * rng.standard_normal()
    return x


def main():
    h = 0.01
    data = ObservationSet(h, exact_ou_path(1.5, 0.5, 0.8, h, 5000, seed=11))
    sched = OptSchedule(phase2=QuasiNewtonPhase(method="bfgs", param_tol=1e-10))
    est = {}
    for name in ("exact", "ss", "ll", "em"):
        objective = make_objective("ou", name, data)
        est[name] = minimize(lambda th: objective(th).value, [1.0, 0.0, 1.0], sched).theta_hat
        print(f"{name:6s} lambda {est[name][0]:.6f}  mean {est[name][1]:.6f}  sigma {est[name][2]:.6f}")
    lam = est["exact"][0]
    print(f"Euler rate predicted from the exact fit: {(1 - np.exp(-lam * h)) / h:.6f}")


if __name__ == "__main__":
    main()
