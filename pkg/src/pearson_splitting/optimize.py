"""Gradient-based minimization: Adam warm start, then (L-)BFGS with a
strong Wolfe line search.

Objectives may return ``inf`` (for example when a covariance is not positive
definite); the line search treats such points as rejected trial steps.
"""

import csv
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import GradientError, InvalidInputError

__all__ = [
    "AdamPhase",
    "QuasiNewtonPhase",
    "OptSchedule",
    "StepRecord",
    "FitResult",
    "gradient",
    "strong_wolfe",
    "minimize",
]


@dataclass(frozen=True)
class AdamPhase:
    lr: float = 0.01
    max_iter: int = 1000
    tol: float = 1e-6
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (self.lr > 0 and self.tol > 0):
            raise InvalidInputError("learning rate and tolerance must be positive")


@dataclass(frozen=True)
class QuasiNewtonPhase:
    method: str = "lbfgs"
    line_search: str = "strong-wolfe"
    max_iter: int = 1000
    param_tol: float = 1e-5
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    # relative objective change below which a failed line search counts as convergence
    stall_tol: float = 1e-10

    def __post_init__(self):
        if self.method not in ("bfgs", "lbfgs"):
            raise InvalidInputError(f"unknown quasi-Newton method {self.method!r}")
        if self.line_search not in ("strong-wolfe", "fixed"):
            raise InvalidInputError(f"unknown line search {self.line_search!r}")
        if not self.param_tol > 0:
            raise InvalidInputError("param_tol must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise InvalidInputError("need 0 < c1 < c2 < 1")


@dataclass(frozen=True)
class OptSchedule:
    phase1: Optional[AdamPhase] = None
    phase2: QuasiNewtonPhase = field(default_factory=QuasiNewtonPhase)
    gradient: str = "central-difference"
    fd_step: float = 1e-6
    positive: tuple = ()

    def __post_init__(self):
        if self.gradient not in ("central-difference", "analytic"):
            raise InvalidInputError(f"unknown gradient mode {self.gradient!r}")
        if not self.fd_step > 0:
            raise InvalidInputError("finite-difference step must be positive")

    @classmethod
    def adam_then_bfgs(cls, **adam):
        return cls(phase1=AdamPhase(**adam), phase2=QuasiNewtonPhase(method="bfgs"))

    @classmethod
    def lbfgs(cls):
        return cls(phase1=None, phase2=QuasiNewtonPhase(method="lbfgs"))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, cfg):
        cfg = dict(cfg)
        p1 = cfg.pop("phase1", None)
        p2 = cfg.pop("phase2", None) or {}
        if "positive" in cfg:
            cfg["positive"] = tuple(cfg["positive"])
        return cls(
            phase1=AdamPhase(**p1) if p1 else None,
            phase2=QuasiNewtonPhase(**p2),
            **cfg,
        )


@dataclass
class StepRecord:
    phase: str
    iteration: int
    objective: float
    grad_norm: float
    step_size: float
    step_norm: float
    armijo: Optional[bool] = None
    curvature: Optional[bool] = None


@dataclass
class FitResult:
    theta_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    wall_clock: float
    failure_reason: Optional[str] = None
    stop_reason: str = ""
    evaluations: int = 0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "theta_hat": [float(v) for v in self.theta_hat],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "wall_clock": float(self.wall_clock),
            "failure_reason": self.failure_reason,
            "stop_reason": self.stop_reason,
            "evaluations": int(self.evaluations),
        }


def gradient(objective, theta, rel_step=1e-6, abs_step=1e-8, f0=None):
    """Central-difference gradient with step ``max(rel_step |theta_i|, abs_step)``.

    If a probe returns a non-finite value the one-sided difference on the
    other side is used (this needs ``f0``, evaluated on demand).
    """
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for i in range(theta.size):
        step = max(rel_step * abs(theta[i]), abs_step)
        tp = theta.copy()
        tm = theta.copy()
        tp[i] += step
        tm[i] -= step
        # use the exactly representable step
        hp = tp[i] - theta[i]
        hm = theta[i] - tm[i]
        fp = float(objective(tp))
        fm = float(objective(tm))
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (hp + hm)
            continue
        if f0 is None:
            f0 = float(objective(theta))
        if not np.isfinite(f0):
            raise GradientError(f"objective is not finite at the base point (coordinate {i})")
        if np.isfinite(fp):
            g[i] = (fp - f0) / hp
        elif np.isfinite(fm):
            g[i] = (f0 - fm) / hm
        else:
            raise GradientError(f"objective is not finite on either side of coordinate {i}")
    if not np.all(np.isfinite(g)):
        raise GradientError("gradient has non-finite entries")
    return g


class _Counted:
    """Objective wrapper that counts calls and maps to optimizer coordinates."""

    def __init__(self, objective, positive, grad=None):
        self.objective = objective
        self.positive = np.asarray(positive, dtype=int)
        self.grad = grad
        self.calls = 0

    def to_model(self, z):
        theta = np.array(z, dtype=float)
        if self.positive.size:
            theta[self.positive] = np.exp(theta[self.positive])
        return theta

    def to_internal(self, theta):
        z = np.array(theta, dtype=float)
        if self.positive.size:
            if np.any(z[self.positive] <= 0):
                raise InvalidInputError("reparameterized coordinates must start positive")
            z[self.positive] = np.log(z[self.positive])
        return z

    def __call__(self, z):
        self.calls += 1
        value = float(self.objective(self.to_model(z)))
        return value if np.isfinite(value) else np.inf

    def gradient(self, z, f0, rel_step):
        if self.grad is not None:
            theta = self.to_model(z)
            g = np.asarray(self.grad(theta), dtype=float)
            if self.positive.size:
                g = g.copy()
                g[self.positive] *= theta[self.positive]
            if not np.all(np.isfinite(g)):
                raise GradientError("analytic gradient has non-finite entries")
            return g
        return gradient(self, z, rel_step=rel_step, f0=f0)


def strong_wolfe(phi, dphi, f0, d0, alpha0, c1=1e-4, c2=0.9, max_iter=40, alpha_max=1e8):
    """Line search returning a step satisfying the strong Wolfe conditions.

    ``phi(a)`` gives the objective along the search ray (``inf`` allowed) and
    ``dphi(a)`` returns ``(gradient, directional derivative)``. Returns
    ``(alpha, f, g)`` or ``None`` when no acceptable step is found.
    """
    if not d0 < 0:
        return None

    def armijo(a, f):
        return np.isfinite(f) and f <= f0 + c1 * a * d0

    def zoom(lo, f_lo, d_lo, hi, f_hi):
        for _ in range(max_iter):
            width = hi - lo
            if abs(width) <= 1e-16 * max(1.0, abs(lo)):
                return None
            a = None
            if np.isfinite(f_hi):
                denom = 2.0 * (f_hi - f_lo - d_lo * width)
                if denom > 0:
                    a = lo - d_lo * width * width / denom
            lower, upper = sorted((lo + 0.1 * width, hi - 0.1 * width))
            if a is None or not (lower <= a <= upper):
                a = lo + 0.5 * width
            f = phi(a)
            if not armijo(a, f) or f >= f_lo:
                hi, f_hi = a, f
                continue
            g, d = dphi(a)
            if abs(d) <= -c2 * d0:
                return a, f, g
            if d * (hi - lo) >= 0:
                hi, f_hi = lo, f_lo
            lo, f_lo, d_lo = a, f, d
        return None

    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = alpha0
    for i in range(max_iter):
        f = phi(a)
        if not armijo(a, f) or (i > 0 and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, f)
        g, d = dphi(a)
        if abs(d) <= -c2 * d0:
            return a, f, g
        if d >= 0:
            return zoom(a, f, d, a_prev, f_prev)
        a_prev, f_prev, d_prev = a, f, d
        a = min(2.0 * a, alpha_max)
    return None


def _adam(fun, z, f, cfg, rel_step, history):
    m = np.zeros_like(z)
    v = np.zeros_like(z)
    best_z, best_f = z.copy(), f
    stall = 0
    lr = cfg.lr
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g = fun.gradient(z, f, rel_step)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        mhat = m / (1 - cfg.beta1 ** it)
        vhat = v / (1 - cfg.beta2 ** it)
        step = lr * mhat / (np.sqrt(vhat) + cfg.eps)
        z_new = z - step
        f_new = fun(z_new)
        if not np.isfinite(f_new):
            # stay put and shrink the step; sentinel values are not accepted
            lr *= 0.5
            history.append(StepRecord("adam", it, f, float(np.linalg.norm(g)), lr, 0.0))
            stall += 1
            if stall >= cfg.patience:
                break
            continue
        z, f = z_new, f_new
        history.append(StepRecord("adam", it, f, float(np.linalg.norm(g)), lr, float(np.linalg.norm(step))))
        if f < best_f - cfg.tol * max(1.0, abs(best_f)):
            best_z, best_f = z.copy(), f
            stall = 0
        else:
            if f < best_f:
                best_z, best_f = z.copy(), f
            stall += 1
            if stall >= cfg.patience:
                break
    return best_z, best_f, it


def _lbfgs_direction(g, s_list, y_list):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((rho, a))
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_list, y_list), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _quasi_newton(fun, z, f, cfg, rel_step, history):
    n = z.size
    g = fun.gradient(z, f, rel_step)
    H = None
    s_list, y_list = [], []
    reason = "max_iter"
    converged = False
    last_decrease = np.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            reason, converged = "zero gradient", True
            break
        if cfg.method == "bfgs" and H is not None:
            direction = -H @ g
        elif cfg.method == "lbfgs" and s_list:
            direction = _lbfgs_direction(g, s_list, y_list)
        else:
            direction = -g / gnorm
        if not direction @ g < 0:
            H, s_list, y_list = None, [], []
            direction = -g / gnorm
        fresh = H is None and not s_list
        alpha0 = 1.0

        def phi(a):
            return fun(z + a * direction)

        def dphi(a):
            gg = fun.gradient(z + a * direction, None, rel_step)
            return gg, float(gg @ direction)

        d0 = float(g @ direction)
        if cfg.line_search == "fixed":
            result = None
            a = alpha0
            for _ in range(60):
                fa = phi(a)
                if np.isfinite(fa) and fa < f:
                    ga, _ = dphi(a)
                    result = (a, fa, ga)
                    break
                a *= 0.5
        else:
            result = strong_wolfe(phi, dphi, f, d0, alpha0, cfg.c1, cfg.c2)
        if result is None:
            if not fresh:
                # drop curvature memory and retry along steepest descent
                H, s_list, y_list = None, [], []
                history.append(StepRecord(cfg.method, it, f, gnorm, 0.0, 0.0, False, False))
                continue
            if last_decrease <= cfg.stall_tol * max(1.0, abs(f)):
                # no representable decrease left along the gradient
                reason, converged = "objective stalled", True
            else:
                reason = "line search failed"
            break
        a, f_new, g_new = result
        s = a * direction
        y = g_new - g
        d_new = float(g_new @ direction)
        history.append(StepRecord(
            cfg.method, it, f_new, float(np.linalg.norm(g_new)), a, float(np.linalg.norm(s)),
            bool(f_new <= f + cfg.c1 * a * d0),
            bool(abs(d_new) <= -cfg.c2 * d0) if cfg.line_search == "strong-wolfe" else None,
        ))
        last_decrease = f - f_new
        z, f, g = z + s, f_new, g_new
        if np.linalg.norm(s) < cfg.param_tol:
            reason, converged = "param_tol", True
            break
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if cfg.method == "bfgs":
                if H is None:
                    H = (sy / (y @ y)) * np.eye(n)
                rho = 1.0 / sy
                V = np.eye(n) - rho * np.outer(s, y)
                H = V @ H @ V.T + rho * np.outer(s, s)
            else:
                s_list.append(s)
                y_list.append(y)
                if len(s_list) > cfg.memory:
                    s_list.pop(0)
                    y_list.pop(0)
    return z, f, it, converged, reason


def minimize(objective, theta_init, schedule=None, grad=None, trace=None):
    """Minimize ``objective(theta)`` following ``schedule``.

    ``objective`` returns a float (``inf`` marks an invalid point). ``grad``
    supplies an analytic gradient when the schedule asks for one. ``trace``
    is an optional CSV filename receiving the step diagnostics.
    """
    schedule = schedule or OptSchedule.lbfgs()
    if schedule.gradient == "analytic" and grad is None:
        raise InvalidInputError("schedule requests an analytic gradient but none was given")
    start = time.perf_counter()
    fun = _Counted(objective, schedule.positive, grad if schedule.gradient == "analytic" else None)
    z = fun.to_internal(np.asarray(theta_init, dtype=float))
    history = []
    f = fun(z)

    def done(z, f, iters, converged, reason, failure=None):
        if converged and not np.isfinite(f):
            converged = False
        result = FitResult(
            fun.to_model(z), f, iters, converged, time.perf_counter() - start,
            failure, reason, fun.calls, history,
        )
        if trace is not None:
            _write_trace(trace, history)
        return result

    if not np.isfinite(f):
        return done(z, f, 0, False, "initial point", "objective not finite at the initial point")
    iterations = 0
    try:
        if schedule.phase1 is not None:
            z, f, k = _adam(fun, z, f, schedule.phase1, schedule.fd_step, history)
            iterations += k
        z, f, k, converged, reason = _quasi_newton(fun, z, f, schedule.phase2, schedule.fd_step, history)
        iterations += k
    except GradientError as exc:
        return done(z, f, iterations, False, "gradient failure", f"indefinite-covariance: {exc}")
    failure = None if converged else reason
    return done(z, f, iterations, converged, reason, failure)


def _write_trace(filename, history):
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase", "iteration", "objective", "grad_norm", "step_size", "step_norm", "armijo", "curvature"])
        for r in history:
            w.writerow([r.phase, r.iteration, repr(r.objective), repr(r.grad_norm), repr(r.step_size),
                        repr(r.step_norm), r.armijo, r.curvature])
