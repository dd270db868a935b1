"""Simulation studies, single fits and the ice-core model comparison.

Everything here is deterministic given the configuration; replication ``r``
of a study draws from a random stream derived from ``(base_seed, r)`` so
results do not depend on how replications are scheduled across workers.
"""

import copy
import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .asymptotics import asymptotic_sd, delta_transform, info_sk, info_wf, invert_information
from .errors import InvalidInputError
from .estimators import ObservationSet, impute_velocity, make_objective, param_names
from .models.kramers import SK_INIT, SK_TRUE, SkParams, skew_t_params
from .models.wright_fisher import (
    NATURAL_NAMES,
    WF_INIT_NATURAL,
    WF_TRUE_NATURAL,
    WfParams,
    wf_backtransform,
    wf_natural_to_reduced,
)
from .optimize import OptSchedule, minimize
from .simulate import (
    SimConfig,
    replication_seed,
    simulate_sk_milstein,
    simulate_wf,
    subsample,
)

__all__ = [
    "SCHEMA_VERSION",
    "default_study_config",
    "paper_scale_overrides",
    "resolve_study_config",
    "params_from_fields",
    "simulate_model",
    "run_replication",
    "run_study",
    "iqr_filter",
    "summarize",
    "fit_dataset",
    "icecore_fit",
    "ICECORE_FIXED",
]

SCHEMA_VERSION = 1

ICECORE_FIXED = {
    "m1": ("b", "d", "alpha", "beta"),
    "m2": ("b", "d"),
    "m3": (),
}


def default_study_config(model):
    if model == "sk":
        return {
            "model": "sk",
            "theta0": SK_TRUE.to_fields(),
            "theta_init": SK_INIT.to_fields(),
            "T": 50.0,
            "h_values": [0.01, 0.02],
            "replications": 20,
            "h_sim": 1e-4,
            "x0": [0.0, 0.0],
            "base_seed": 0,
            "estimators": ["ss", "em", "ga", "ll"],
            "outlier_rule": {"multiplier": 1.5, "passes": 2},
            "schedule": OptSchedule.lbfgs().to_dict(),
            "sd_path": {"T": 200.0, "h": 0.001},
        }
    if model == "wf":
        return {
            "model": "wf",
            "theta0": wf_natural_to_reduced(WF_TRUE_NATURAL).to_fields(),
            "theta_init": wf_natural_to_reduced(WF_INIT_NATURAL).to_fields(),
            "tau0": WF_TRUE_NATURAL.tau,
            "q4_0": float(WF_TRUE_NATURAL.q[3]),
            "T": 20.0,
            "h_values": [0.2],
            "replications": 20,
            "h_sim": 2e-4,
            "x0": [0.25, 0.25, 0.25],
            "base_seed": 0,
            "estimators": ["ss", "em", "ga", "ll"],
            "outlier_rule": {"multiplier": 3.0, "passes": 1},
            # Adam is capped at 100 iterations at desk scale; see paper_scale_overrides
            "schedule": OptSchedule.adam_then_bfgs(max_iter=100).to_dict(),
            "sd_path": {"T": 200.0, "h": 0.001},
        }
    raise InvalidInputError(f"unknown model {model!r}")


def paper_scale_overrides(model):
    """Settings that restore the full-size study."""
    out = {"replications": 1000}
    if model == "wf":
        out["schedule"] = OptSchedule.adam_then_bfgs(max_iter=1000).to_dict()
    return out


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("theta0", "theta_init"):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_study_config(cfg):
    """Fill defaults for the configured model and validate."""
    cfg = dict(cfg or {})
    model = cfg.get("model", "sk")
    out = _merge(default_study_config(model), cfg)
    if int(out["replications"]) < 1:
        raise InvalidInputError("replications must be at least 1")
    out["replications"] = int(out["replications"])
    out["h_values"] = [float(h) for h in np.atleast_1d(out["h_values"])]
    for h in out["h_values"]:
        _factor(h, out["h_sim"])
    _n_steps(out["T"], out["h_sim"])
    if isinstance(out["estimators"], str):
        out["estimators"] = [e for e in out["estimators"].split(",") if e]
    out["estimators"] = list(out["estimators"])
    for est in out["estimators"]:
        if est not in ("ss", "em", "ga", "ll"):
            raise InvalidInputError(f"unknown estimator {est!r}")
    rule = out["outlier_rule"]
    if rule.get("multiplier", 0) <= 0 or int(rule.get("passes", 0)) < 1:
        raise InvalidInputError("outlier rule needs a positive multiplier and at least one pass")
    OptSchedule.from_dict(out["schedule"])
    params_from_fields(model, out["theta0"])
    params_from_fields(model, out["theta_init"])
    return out


def _factor(h, h_sim):
    factor = h / h_sim
    k = int(round(factor))
    if k < 1 or abs(factor - k) > 1e-9 * k:
        raise InvalidInputError(f"observation step {h} is not a multiple of the simulation step {h_sim}")
    return k


def _n_steps(T, h_sim):
    n = T / h_sim
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-9 * k:
        raise InvalidInputError(f"horizon {T} is not a multiple of the simulation step {h_sim}")
    return k


def params_from_fields(model, fields):
    if model == "sk":
        return SkParams.from_fields(fields)
    if model == "wf":
        return WfParams.from_fields(fields)
    raise InvalidInputError(f"unknown model {model!r}")


def simulate_model(model, params, T, h_sim, x0, seed):
    cfg = SimConfig(h_sim, _n_steps(T, h_sim), seed, x0)
    if model == "sk":
        return simulate_sk_milstein(params, cfg)
    if model == "wf":
        return simulate_wf(params, cfg)
    raise InvalidInputError(f"unknown model {model!r}")


def _reported(model, cfg, theta):
    """Parameters on the scale errors are reported in, with their names."""
    if model == "wf":
        J, c = wf_backtransform(cfg["tau0"], cfg["q4_0"])
        return J @ theta + c, list(NATURAL_NAMES)
    return np.asarray(theta, dtype=float), param_names(model)


def run_replication(cfg, r):
    """Simulate one dataset per step size and fit every configured estimator."""
    model = cfg["model"]
    p0 = params_from_fields(model, cfg["theta0"])
    theta0 = p0.to_vector()
    theta_init = params_from_fields(model, cfg["theta_init"]).to_vector()
    schedule = OptSchedule.from_dict(cfg["schedule"])
    truth, _ = _reported(model, cfg, theta0)
    fine = simulate_model(model, p0, cfg["T"], cfg["h_sim"], cfg["x0"], replication_seed(cfg["base_seed"], r))
    rows = []
    for h in cfg["h_values"]:
        data = ObservationSet.from_path(subsample(fine, _factor(h, cfg["h_sim"])))
        for est in cfg["estimators"]:
            objective = make_objective(model, est, data)
            start = time.perf_counter()
            fit = minimize(lambda th: objective(th).value, theta_init, schedule)
            elapsed = time.perf_counter() - start
            est_rep, _ = _reported(model, cfg, fit.theta_hat)
            error = est_rep - truth
            if fit.converged:
                status = "ok"
            else:
                status = fit.failure_reason or fit.stop_reason or "not-converged"
            rows.append({
                "replication": r,
                "estimator": est,
                "h": h,
                "theta_hat": [float(v) for v in fit.theta_hat],
                "error": [float(v) for v in error],
                "normalized_error": [float(v) for v in error / np.abs(truth)] if model == "sk" else None,
                "objective": float(fit.objective),
                "converged": bool(fit.converged),
                "iterations": int(fit.iterations),
                "wall_clock": elapsed,
                "status": status,
            })
    return rows


def _replication_task(args):
    cfg, r = args
    return run_replication(cfg, r)


def iqr_filter(errors, multiplier, passes=1):
    """Indices of rows kept by the any-parameter IQR rule.

    ``errors`` is ``(n_rows, n_params)``. A row is removed when any of its
    entries lies outside ``[Q1 - m IQR, Q3 + m IQR]`` for that column.
    Each further pass re-applies the rule to the rows kept so far.
    """
    errors = np.asarray(errors, dtype=float)
    keep = np.arange(errors.shape[0])
    for _ in range(int(passes)):
        if keep.size == 0:
            break
        sub = errors[keep]
        q1, q3 = np.percentile(sub, [25, 75], axis=0)
        iqr = q3 - q1
        ok = np.all((sub >= q1 - multiplier * iqr) & (sub <= q3 + multiplier * iqr), axis=1)
        keep = keep[ok]
    return keep


def summarize(cfg, rows, names):
    """Aggregate per (estimator, h): medians, IQRs, outlier removal, timings."""
    model = cfg["model"]
    rule = cfg["outlier_rule"]
    key = "normalized_error" if model == "sk" else "error"
    out = []
    for est in cfg["estimators"]:
        for h in cfg["h_values"]:
            group = [row for row in rows if row["estimator"] == est and row["h"] == h]
            usable = [row for row in group if np.isfinite(row["objective"])]
            entry = {
                "estimator": est,
                "h": h,
                "replications": len(group),
                "converged": sum(row["converged"] for row in group),
                "failed": len(group) - len(usable),
                "median_wall_clock": float(np.median([row["wall_clock"] for row in group])) if group else None,
            }
            if usable:
                E = np.array([row[key] for row in usable])
                keep = iqr_filter(E, rule["multiplier"], rule.get("passes", 1))
                kept = E[keep]
                entry["retained"] = [usable[i]["replication"] for i in keep]
                entry["outliers"] = len(usable) - len(keep)
                entry["outlier_percent"] = 100.0 * entry["outliers"] / len(usable)
                entry["median_wall_clock_retained"] = (
                    float(np.median([usable[i]["wall_clock"] for i in keep])) if keep.size else None
                )
                if kept.size:
                    q1, med, q3 = np.percentile(kept, [25, 50, 75], axis=0)
                    entry["median_error"] = dict(zip(names, map(float, med)))
                    entry["median_abs_error"] = dict(zip(names, map(float, np.median(np.abs(kept), axis=0))))
                    entry["iqr_error"] = dict(zip(names, map(float, q3 - q1)))
            else:
                entry.update({"retained": [], "outliers": 0, "outlier_percent": 0.0})
            out.append(entry)
    return out


def study_asymptotic_sd(cfg):
    """Plug-in standard deviations per observation step, on the reported scale."""
    model = cfg["model"]
    p0 = params_from_fields(model, cfg["theta0"])
    sd_cfg = cfg["sd_path"]
    h_path = float(sd_cfg["h"])
    fine = simulate_model(model, p0, sd_cfg["T"], cfg["h_sim"], cfg["x0"],
                          np.random.SeedSequence(int(cfg["base_seed"]), spawn_key=(2 ** 31 - 1,)))
    path = subsample(fine, _factor(h_path, cfg["h_sim"]))
    result = {}
    jitter = 0.0
    for h in cfg["h_values"]:
        N = int(round(cfg["T"] / h))
        if model == "sk":
            info = info_sk(path, p0)
            sd = asymptotic_sd(info, N, h)
            jitter = max(jitter, sd.jitter)
            values = sd.concatenated()
            names = param_names("sk")
            truth = np.abs(p0.to_vector())
            result[str(h)] = {
                "sd": dict(zip(names, map(float, values))),
                "normalized_sd": dict(zip(names, map(float, values / truth))),
            }
        else:
            inv, j = invert_information(info_wf(path, p0))
            jitter = max(jitter, j)
            J, _ = wf_backtransform(cfg["tau0"], cfg["q4_0"])
            cov = delta_transform(J, inv / (N * h))
            result[str(h)] = {"sd": dict(zip(NATURAL_NAMES, map(float, np.sqrt(np.diag(cov)))))}
    return result, jitter


def run_study(cfg, workers=1, with_sd=True):
    """Run all replications and aggregate. Returns ``(report, rows)``."""
    cfg = resolve_study_config(cfg)
    tasks = [(cfg, r) for r in range(cfg["replications"])]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_replication_task, tasks))
    else:
        chunks = [_replication_task(t) for t in tasks]
    rows = sorted((row for chunk in chunks for row in chunk),
                  key=lambda row: (row["replication"], row["h"], cfg["estimators"].index(row["estimator"])))
    _, names = _reported(cfg["model"], cfg, params_from_fields(cfg["model"], cfg["theta0"]).to_vector())
    report = {
        "schema": SCHEMA_VERSION,
        "kind": "study",
        "config": cfg,
        "param_names": names,
        "error_scale": "normalized" if cfg["model"] == "sk" else "natural",
        "aggregates": summarize(cfg, rows, names),
        "replications": rows,
    }
    if with_sd:
        sd, jitter = study_asymptotic_sd(cfg)
        report["asymptotic_sd"] = sd
        report["information_jitter"] = jitter
    return report, rows


def fit_dataset(model, estimator, data, theta_init, schedule=None, fixed=None):
    """Fit one dataset; ``fixed`` maps parameter indices to held values."""
    objective = make_objective(model, estimator, data)
    theta_init = np.asarray(theta_init, dtype=float)
    schedule = schedule or OptSchedule.lbfgs()
    if not fixed:
        return minimize(lambda th: objective(th).value, theta_init, schedule)
    fixed_idx = np.array(sorted(fixed), dtype=int)
    free = np.setdiff1d(np.arange(theta_init.size), fixed_idx)
    base = theta_init.copy()
    base[fixed_idx] = [fixed[i] for i in fixed_idx]

    def full(z):
        theta = base.copy()
        theta[free] = z
        return theta

    result = minimize(lambda z: objective(full(z)).value, base[free], schedule)
    result.theta_hat = full(result.theta_hat)
    return result


def icecore_fit(x_series, h, variant, theta_init=None, schedule=None):
    """Fit a nested oscillator model to a position series with imputed velocity.

    Returns a report dictionary with the estimates, the negative
    log-likelihood including the Gaussian constant, and the skew-t summary
    of the fitted velocity law when it is defined.
    """
    variant = variant.lower()
    if variant not in ICECORE_FIXED:
        raise InvalidInputError(f"unknown model variant {variant!r}")
    data = impute_velocity(x_series, h)
    names = param_names("sk")
    init = SK_INIT.to_vector() if theta_init is None else np.asarray(theta_init, dtype=float)
    fixed = {names.index(n): 0.0 for n in ICECORE_FIXED[variant]}
    fit = fit_dataset("sk", "ss", data, init, schedule, fixed)
    p = SkParams.from_vector(fit.theta_hat)
    nll = 0.5 * (fit.objective + data.n * data.d * math.log(2 * math.pi))
    try:
        nu, mu, nu_sigma2, omega = skew_t_params(p.eta, p.alpha, p.beta, p.gamma)
        skew = {"nu": float(nu), "mu": float(mu), "nu_sigma2": float(nu_sigma2), "omega": float(omega)}
    except InvalidInputError:
        skew = None
    return {
        "variant": variant,
        "fixed": list(ICECORE_FIXED[variant]),
        "estimates": dict(zip(names, map(float, fit.theta_hat))),
        "nll": float(nll),
        "objective": float(fit.objective),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "stop_reason": fit.stop_reason,
        "N": data.n,
        "h": data.h,
        "skew_t": skew,
        "velocity_correction": "none (plain forward differences)",
    }, fit
