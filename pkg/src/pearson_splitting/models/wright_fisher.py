"""Reduced three-dimensional Wright-Fisher diffusion with mutation and selection.

Four allele frequencies live on the simplex; the fourth is eliminated, so the
state is ``x = (x1, x2, x3)`` with ``x4 = 1 - x1 - x2 - x3``. The reduced
drift is ``F(x) = kappa + K x - x (x . lambda)`` and the diffusion matrix is
``diag(x) - x x^T``.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from ..moments import LinearPearsonModel, QuadraticDiffusionSpec
from .split import SplitNonlinearModel

__all__ = [
    "WfParams",
    "WfNaturalParams",
    "WF_TRUE_NATURAL",
    "WF_INIT_NATURAL",
    "NATURAL_NAMES",
    "wf_drift",
    "wf_drift_jacobian",
    "wf_drift_hessian",
    "wf_drift_param_jacobian",
    "wf_diffusion_spec",
    "wf_split",
    "wf_natural_to_reduced",
    "wf_reduced_to_natural",
    "wf_backtransform",
    "wf_inverse_diffusion",
    "check_interior",
]

REDUCED_NAMES = (
    [f"kappa{i}" for i in range(1, 4)]
    + [f"K{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    + [f"lambda{i}" for i in range(1, 4)]
)
NATURAL_NAMES = [f"q{i}" for i in range(1, 4)] + [
    f"p{i}{j}" for i in range(1, 5) for j in range(1, 4)
]


@dataclass(frozen=True)
class WfParams:
    """Reduced parameters ``(kappa, K, lambda)`` in vector order kappa, K row-major, lambda."""

    kappa: np.ndarray
    K: np.ndarray
    lam: np.ndarray

    names = REDUCED_NAMES

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=float).reshape(3)
        K = np.asarray(self.K, dtype=float).reshape(3, 3)
        lam = np.asarray(self.lam, dtype=float).reshape(3)
        if not (np.all(np.isfinite(kappa)) and np.all(np.isfinite(K)) and np.all(np.isfinite(lam))):
            raise InvalidInputError("Wright-Fisher parameters must be finite")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "lam", lam)

    def to_vector(self):
        return np.concatenate([self.kappa, self.K.ravel(), self.lam])

    @classmethod
    def from_vector(cls, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (15,):
            raise InvalidInputError("Wright-Fisher parameter vector has 15 entries")
        return cls(theta[:3], theta[3:12].reshape(3, 3), theta[12:])

    def to_fields(self):
        return {
            "wf.kappa": self.kappa.tolist(),
            "wf.K": self.K.tolist(),
            "wf.lambda": self.lam.tolist(),
        }

    @classmethod
    def from_fields(cls, fields):
        try:
            return cls(fields["wf.kappa"], fields["wf.K"], fields["wf.lambda"])
        except KeyError as exc:
            raise InvalidInputError(f"missing Wright-Fisher field {exc}") from None


@dataclass(frozen=True)
class WfNaturalParams:
    """Mutation rate ``tau``, selection vector ``q`` and mutation matrix ``P``."""

    tau: float
    q: np.ndarray
    P: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(4)
        P = np.asarray(self.P, dtype=float).reshape(4, 4)
        if not self.tau > 0:
            raise InvalidInputError("mutation rate must be positive")
        if np.any(P < -1e-12) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-10):
            raise InvalidInputError("mutation matrix must be row-stochastic")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "P", P)

    @classmethod
    def unchecked(cls, tau, q, P):
        """Build without validation; estimates may leave the probability simplex."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "tau", float(tau))
        object.__setattr__(obj, "q", np.asarray(q, dtype=float).reshape(4))
        object.__setattr__(obj, "P", np.asarray(P, dtype=float).reshape(4, 4))
        return obj

    def identifiable_vector(self):
        """``(q1, q2, q3, p_ij for i = 1..4, j = 1..3)``."""
        return np.concatenate([self.q[:3], self.P[:, :3].ravel()])


WF_TRUE_NATURAL = WfNaturalParams(
    tau=10.0,
    q=[25.0, 40.0, 30.0, 10.0],
    P=[
        [0.2, 0.3, 0.15, 0.35],
        [0.2, 0.05, 0.35, 0.40],
        [0.25, 0.6, 0.1, 0.05],
        [0.15, 0.1, 0.1, 0.65],
    ],
)

WF_INIT_NATURAL = WfNaturalParams(
    tau=10.0,
    q=[11.0, 11.0, 11.0, 10.0],
    P=[
        [0.53, 0.05, 0.05, 0.37],
        [0.05, 0.53, 0.05, 0.37],
        [0.05, 0.05, 0.53, 0.37],
        [0.05, 0.05, 0.05, 0.85],
    ],
)


def wf_drift(p, x):
    x = np.asarray(x, dtype=float)
    sel = x @ p.lam
    return p.kappa + x @ p.K.T - x * sel[..., None]


def wf_drift_jacobian(p, x):
    x = np.asarray(x, dtype=float)
    sel = x @ p.lam
    return p.K - sel[..., None, None] * np.eye(3) - x[..., :, None] * p.lam


def wf_drift_hessian(p, x):
    """``H[..., m, i, j] = d^2 F_m / dx_i dx_j``; constant in ``x``."""
    x = np.asarray(x, dtype=float)
    eye = np.eye(3)
    H = -(eye[:, :, None] * p.lam[None, None, :] + eye[:, None, :] * p.lam[None, :, None])
    return np.broadcast_to(H, x.shape[:-1] + (3, 3, 3))


def wf_drift_param_jacobian(x):
    """Derivative of the drift with respect to the 15 reduced parameters."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (3, 15))
    out[..., :, :3] = np.eye(3)
    for m in range(3):
        out[..., m, 3 + 3 * m:6 + 3 * m] = x
    out[..., :, 12:] = -x[..., :, None] * x[..., None, :]
    return out


def wf_diffusion_spec():
    alpha = -np.eye(9)
    beta = np.zeros((9, 3))
    for i in range(3):
        beta[i + 3 * i, i] = 1.0
    return QuadraticDiffusionSpec(alpha, beta, np.zeros(9))


def wf_inverse_diffusion(x):
    """Closed-form inverse of ``diag(x) - x x^T`` on the open simplex."""
    x = np.asarray(x, dtype=float)
    x4 = 1.0 - x.sum(axis=-1)
    return (1.0 / x)[..., :, None] * np.eye(3) + (1.0 / x4)[..., None, None] * np.ones((3, 3))


def check_interior(states):
    states = np.asarray(states, dtype=float)
    if np.any(states <= 0.0) or np.any(states.sum(axis=-1) >= 1.0):
        raise InvalidInputError("Wright-Fisher states must lie strictly inside the simplex")
    return states


def wf_split(p, moment1, moment2=None):
    """Split around ``b`` = empirical mean, with ``A = DF(b)``.

    The remainder ``N(x) = F(b) - (x - b)(x - b)^T lambda`` has Jacobian
    ``-((x - b) . lambda) I - (x - b) lambda^T`` which vanishes on average.
    ``moment2`` is accepted for interface symmetry and not needed here.
    """
    b = np.asarray(moment1, dtype=float).reshape(3)
    A = wf_drift_jacobian(p, b)
    Fb = wf_drift(p, b)
    lam = p.lam
    eye = np.eye(3)

    def N(x):
        dx = np.asarray(x, dtype=float) - b
        return Fb - dx * (dx @ lam)[..., None]

    def DN(x):
        dx = np.asarray(x, dtype=float) - b
        return -(dx @ lam)[..., None, None] * eye - dx[..., :, None] * lam

    return SplitNonlinearModel(LinearPearsonModel(A, b, wf_diffusion_spec()), N, DN)


def wf_natural_to_reduced(n):
    t2 = 0.5 * n.tau
    P = n.P
    lam = n.q[:3] - n.q[3]
    kappa = t2 * P[3, :3]
    # K_ij = (tau/2)(p_ji - p_4i - delta_ij) + lambda_i delta_ij
    K = t2 * (P[:3, :3].T - P[3, :3][:, None] - np.eye(3)) + np.diag(lam)
    return WfParams(kappa, K, lam)


def wf_reduced_to_natural(p, tau0, q4_0):
    """Recover natural parameters given the known ``tau0`` and ``q4``."""
    if not tau0 > 0:
        raise InvalidInputError("tau0 must be positive")
    q = np.append(p.lam + q4_0, q4_0)
    P = np.zeros((4, 4))
    P[3, :3] = 2.0 * p.kappa / tau0
    P[:3, :3] = ((2.0 / tau0) * (p.K - np.diag(p.lam)) + np.eye(3) + P[3, :3][:, None]).T
    P[:, 3] = 1.0 - P[:, :3].sum(axis=1)
    return WfNaturalParams.unchecked(tau0, q, P)


def wf_backtransform(tau0, q4_0):
    """Affine map ``theta -> J theta + c`` from reduced to identifiable natural parameters."""
    if not tau0 > 0:
        raise InvalidInputError("tau0 must be positive")

    def phi(theta):
        return wf_reduced_to_natural(WfParams.from_vector(theta), tau0, q4_0).identifiable_vector()

    c = phi(np.zeros(15))
    J = np.column_stack([phi(e) - c for e in np.eye(15)])
    return J, c
