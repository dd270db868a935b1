"""Forward simulation of diffusion paths.

Random numbers come from a Philox counter-based generator keyed by a
``SeedSequence``, so paths are reproducible and independent replication
streams can be spawned from one base seed.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidInputError
from .models.kramers import sk_force

__all__ = [
    "SimConfig",
    "Path",
    "make_rng",
    "replication_seed",
    "euler_maruyama",
    "simulate_wf",
    "simulate_sk_milstein",
    "sk_milstein_transitions",
    "subsample",
    "write_path_csv",
    "read_path_csv",
    "WF_CLAMP_EPS",
]

WF_CLAMP_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    h_sim: float
    n_steps: int
    seed: int
    x0: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.h_sim > 0:
            raise InvalidInputError("simulation step must be positive")
        if int(self.n_steps) < 1:
            raise InvalidInputError("need at least one step")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))


@dataclass(frozen=True)
class Path:
    h: float
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        object.__setattr__(self, "states", states)

    @property
    def d(self):
        return self.states.shape[1]

    @property
    def n(self):
        """Number of transitions."""
        return self.states.shape[0] - 1

    @property
    def times(self):
        return self.h * np.arange(self.states.shape[0])


def make_rng(seed):
    """Counter-based generator; ``seed`` may be an int or a ``SeedSequence``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def replication_seed(base_seed, replication):
    """Independent stream for replication ``r`` of a study."""
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(replication),))


def _check_finite(value, step):
    if not np.all(np.isfinite(value)):
        raise DivergenceError(f"non-finite state at step {step}", step=step)


def euler_maruyama(drift, diffusion_factor, cfg, chunk=65536):
    """Euler-Maruyama path ``X_{k+1} = X_k + h F(X_k) + S(X_k) sqrt(h) Z_k``.

    ``diffusion_factor(x)`` returns a ``(d, m)`` matrix whose product with
    its transpose is the diffusion matrix.
    """
    rng = make_rng(cfg.seed)
    h = cfg.h_sim
    sq = math.sqrt(h)
    x = cfg.x0.copy()
    out = np.empty((cfg.n_steps + 1, x.shape[0]))
    out[0] = x
    m = np.asarray(diffusion_factor(x)).reshape(x.shape[0], -1).shape[1]
    k = 0
    while k < cfg.n_steps:
        block = min(chunk, cfg.n_steps - k)
        Z = rng.standard_normal((block, m))
        for j in range(block):
            S = np.asarray(diffusion_factor(x)).reshape(x.shape[0], m)
            x = x + h * np.asarray(drift(x)) + S @ (sq * Z[j])
            k += 1
            if not np.all(np.isfinite(x)):
                raise DivergenceError(f"non-finite state at step {k}", step=k)
            out[k] = x
    return Path(h, out)


def simulate_wf(params, cfg, eps=WF_CLAMP_EPS, noise_scale=1.0):
    """Wright-Fisher path driven by six independent Brownian motions.

    ``params`` is a :class:`WfParams` (or natural parameters, which are
    reduced first). Each pairwise exchange ``i <-> j`` of allele mass has
    its own noise ``sqrt(x_i x_j) dW``; after every step the state is
    clamped so all four frequencies stay at least ``eps``.
    ``noise_scale = 0`` gives the deterministic Euler path.
    """
    from .models.wright_fisher import WfNaturalParams, wf_natural_to_reduced

    if isinstance(params, WfNaturalParams):
        params = wf_natural_to_reduced(params)
    x0 = cfg.x0
    if x0.shape != (3,) or np.any(x0 <= 0) or x0.sum() >= 1:
        raise InvalidInputError("initial state must lie strictly inside the simplex")
    kappa = [float(v) for v in params.kappa]
    K = [[float(v) for v in row] for row in params.K]
    lam = [float(v) for v in params.lam]
    h = cfg.h_sim
    sq = math.sqrt(h) * noise_scale
    rng = make_rng(cfg.seed)
    n = cfg.n_steps
    out = np.empty((n + 1, 3))
    out[0] = x0
    x1, x2, x3 = (float(v) for v in x0)
    lo, hi = eps, 1.0 - eps
    sqrt = math.sqrt
    k = 0
    while k < n:
        block = min(65536, n - k)
        Z = (sq * rng.standard_normal((block, 6))).tolist()
        for z in Z:
            x4 = 1.0 - x1 - x2 - x3
            sel = lam[0] * x1 + lam[1] * x2 + lam[2] * x3
            f1 = kappa[0] + K[0][0] * x1 + K[0][1] * x2 + K[0][2] * x3 - x1 * sel
            f2 = kappa[1] + K[1][0] * x1 + K[1][1] * x2 + K[1][2] * x3 - x2 * sel
            f3 = kappa[2] + K[2][0] * x1 + K[2][1] * x2 + K[2][2] * x3 - x3 * sel
            s12 = sqrt(x1 * x2) * z[0]
            s13 = sqrt(x1 * x3) * z[1]
            s14 = sqrt(x1 * x4) * z[2]
            s23 = sqrt(x2 * x3) * z[3]
            s24 = sqrt(x2 * x4) * z[4]
            s34 = sqrt(x3 * x4) * z[5]
            x1 = x1 + h * f1 + s12 + s13 + s14
            x2 = x2 + h * f2 - s12 + s23 + s24
            x3 = x3 + h * f3 - s13 - s23 + s34
            x1 = min(max(x1, lo), hi)
            x2 = min(max(x2, lo), hi)
            x3 = min(max(x3, lo), hi)
            total = x1 + x2 + x3
            if total > hi:
                # rescale so the eliminated frequency keeps at least eps
                scale = hi / total
                x1 *= scale
                x2 *= scale
                x3 *= scale
            k += 1
            out[k, 0] = x1
            out[k, 1] = x2
            out[k, 2] = x3
        _check_finite(out[k], k)
    return Path(h, out)


def simulate_sk_milstein(params, cfg):
    """Kramers oscillator path: exact position update, Milstein velocity update."""
    p = params
    h = cfg.h_sim
    sq = math.sqrt(h)
    n = cfg.n_steps
    x, v = (float(t) for t in cfg.x0)
    rng = make_rng(cfg.seed)
    out = np.empty((n + 1, 2))
    out[0] = (x, v)
    eta, a, b, c, d = p.eta, p.a, p.b, p.c, p.d
    al, be, ga = p.alpha, p.beta, p.gamma
    sqrt = math.sqrt
    k = 0
    while k < n:
        block = min(65536, n - k)
        Z = (sq * rng.standard_normal(block)).tolist()
        for dw in Z:
            s2 = (al * v + be) * v + ga
            sig = sqrt(s2)
            force = ((a * x + b) * x + c) * x + d
            # sigma sigma' = (2 alpha v + beta) / 2
            v_new = v + h * (force - eta * v) + sig * dw + 0.25 * (2 * al * v + be) * (dw * dw - h)
            x = x + h * v
            v = v_new
            k += 1
            out[k, 0] = x
            out[k, 1] = v
        _check_finite(out[k], k)
    return Path(h, out)


def sk_milstein_transitions(params, z0, h, n_sub, n_samples, rng):
    """Endpoints after time ``h`` from state ``z0``, ``n_samples`` independent copies.

    Each copy takes ``n_sub`` Milstein steps of size ``h / n_sub``; all
    copies advance together as arrays.
    """
    p = params
    dt = h / n_sub
    x = np.full(n_samples, float(z0[0]))
    v = np.full(n_samples, float(z0[1]))
    for _ in range(n_sub):
        dw = math.sqrt(dt) * rng.standard_normal(n_samples)
        sig = np.sqrt(np.maximum((p.alpha * v + p.beta) * v + p.gamma, 0.0))
        v_new = (v + dt * (sk_force(p, x) - p.eta * v) + sig * dw
                 + 0.25 * (2 * p.alpha * v + p.beta) * (dw * dw - dt))
        x = x + dt * v
        v = v_new
    return np.column_stack([x, v])


def subsample(path, factor):
    factor = int(factor)
    if factor < 1 or path.n % factor != 0:
        raise InvalidInputError(f"factor {factor} does not divide {path.n} steps")
    return Path(path.h * factor, path.states[::factor].copy())


def write_path_csv(path, filename, meta=None):
    """Write ``t,x1,...,xd`` rows with 17 significant digits plus a JSON sidecar."""
    d = path.d
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i}" for i in range(1, d + 1)])
        for t, row in zip(path.times, path.states):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
    if meta is not None:
        sidecar = dict(meta)
        sidecar.setdefault("h", path.h)
        sidecar.setdefault("N", path.n)
        with open(str(filename) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)


def read_path_csv(filename):
    """Read a path CSV; the step is inferred from the time column."""
    try:
        data = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse {filename}: {exc}") from None
    if data.shape[0] < 3 or data.shape[1] < 2:
        raise InvalidInputError("path file needs a time column and at least three rows")
    t = data[:, 0]
    dt = np.diff(t)
    h = float(np.mean(dt))
    if not h > 0 or np.max(np.abs(dt - h)) > 1e-6 * max(h, 1e-12) + 1e-12 * np.max(np.abs(t)):
        raise InvalidInputError("observations must be equally spaced in time")
    return Path(h, data[:, 1:])
