"""Exact transition moments of multivariate Pearson diffusions.

A Pearson diffusion has linear drift ``A (x - b)`` and a diffusion matrix
that is quadratic in the state::

    vec(Sigma Sigma^T(x)) = alpha vec(x x^T) + beta x + gamma

with ``alpha`` of shape ``(d*d, d*d)``, ``beta`` of shape ``(d*d, d)`` and
``gamma`` of length ``d*d`` (column-major ``vec``). The first two moments
solve linear ODEs, so both are available in closed form through block
matrix exponentials.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import expm, kron, kron_sum, unvec, van_loan_integral, vec

__all__ = [
    "QuadraticDiffusionSpec",
    "LinearPearsonModel",
    "MomentState",
    "OmegaCache",
    "sigma_sigma_t",
    "mean_at",
    "covariance_vec",
    "moments_at",
    "omega_h",
    "precompute_omega_cache",
    "generator_apply",
    "generator_sigma_sigma_t",
]


@dataclass(frozen=True)
class QuadraticDiffusionSpec:
    """Coefficients of a diffusion matrix quadratic in the state."""

    check_alpha: np.ndarray
    check_beta: np.ndarray
    check_gamma: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.check_alpha, dtype=float)
        d2 = a.shape[0]
        d = int(round(np.sqrt(d2)))
        if a.shape != (d2, d2) or d * d != d2:
            raise InvalidInputError(f"alpha must be (d^2, d^2), got {a.shape}")
        b = np.asarray(self.check_beta, dtype=float)
        g = np.asarray(self.check_gamma, dtype=float)
        if b.size != d2 * d or g.size != d2:
            raise InvalidInputError(f"beta must be (d^2, d) and gamma length d^2 for d = {d}")
        b = b.reshape(d2, d)
        g = g.reshape(d2)
        object.__setattr__(self, "check_alpha", a)
        object.__setattr__(self, "check_beta", b)
        object.__setattr__(self, "check_gamma", g)

    @property
    def dim(self):
        return self.check_beta.shape[1]

    @classmethod
    def additive(cls, sigma_sigma_t_matrix):
        """State-independent diffusion matrix."""
        S = np.atleast_2d(np.asarray(sigma_sigma_t_matrix, dtype=float))
        d = S.shape[0]
        return cls(np.zeros((d * d, d * d)), np.zeros((d * d, d)), vec(S))

    def is_symmetric(self, x, tol=1e-12):
        S = sigma_sigma_t(self, x)
        return np.max(np.abs(S - np.swapaxes(S, -1, -2))) <= tol * max(1.0, np.max(np.abs(S)))


@dataclass(frozen=True)
class LinearPearsonModel:
    """Linear drift ``A (x - b)`` with a quadratic diffusion matrix."""

    A: np.ndarray
    b: np.ndarray
    diffusion: QuadraticDiffusionSpec

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        d = self.diffusion.dim
        if A.shape != (d, d) or b.shape != (d,):
            raise InvalidInputError(
                f"drift shapes A{A.shape}, b{b.shape} do not match diffusion dim {d}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.b.shape[0]

    def drift(self, x):
        return (np.asarray(x, dtype=float) - self.b) @ self.A.T

    def is_stable(self):
        return bool(np.all(np.linalg.eigvals(self.A).real < 0))


@dataclass(frozen=True)
class MomentState:
    t: float
    mean: np.ndarray
    cov: np.ndarray


def sigma_sigma_t(spec, x):
    """Diffusion matrix at ``x``; ``x`` may be a stack of states ``(n, d)``."""
    x = np.asarray(x, dtype=float)
    d = spec.dim
    outer = vec(x[..., :, None] * x[..., None, :])
    v = outer @ spec.check_alpha.T + x @ spec.check_beta.T + spec.check_gamma
    return unvec(v, d, d)


def mean_at(model, m0, t):
    """Mean at time ``t`` started from mean ``m0``."""
    m0 = np.asarray(m0, dtype=float)
    E = expm(model.A * t)
    return (m0 - model.b) @ E.T + model.b


def _operator(model):
    A, alpha = model.A, model.diffusion.check_alpha
    return kron_sum(A, A) + alpha


def _covariance_blocks(model, t):
    """The x-independent matrices of the covariance formula.

    Returns ``(expF, I1, I2, I3, I4, I5)`` where ``expF = expm(F t)`` with
    ``F = A (+) A + alpha`` and ``I1..I5`` are Van Loan integrals whose right
    exponentials carry ``A (+) A``, ``I (x) A``, ``A (x) I``, ``A`` and
    nothing, matching how ``delta delta^T``, ``delta b^T``, ``b delta^T``,
    ``delta`` and the constant ``Sigma Sigma^T(b)`` evolve.
    """
    A = model.A
    d = model.dim
    spec = model.diffusion
    eye = np.eye(d)
    F = _operator(model)
    expF = expm(F * t)
    I1 = van_loan_integral(F, spec.check_alpha, kron_sum(A, A), t)
    I2 = van_loan_integral(F, spec.check_alpha, kron(eye, A), t)
    I3 = van_loan_integral(F, spec.check_alpha, kron(A, eye), t)
    I4 = van_loan_integral(F, spec.check_beta, A, t)
    I5 = van_loan_integral(F, np.eye(d * d), np.zeros((d * d, d * d)), t)
    return expF, I1, I2, I3, I4, I5


def _check_psd(C0):
    C0 = np.atleast_2d(np.asarray(C0, dtype=float))
    if not np.allclose(C0, C0.T, atol=1e-12 * max(1.0, np.abs(C0).max())):
        raise InvalidInputError("initial covariance must be symmetric")
    ev = np.linalg.eigvalsh(C0)
    if ev.min() < -1e-12 * max(1.0, np.abs(ev).max()):
        raise InvalidInputError("initial covariance must be positive semidefinite")
    return C0


def _symmetrize(C):
    return 0.5 * (C + np.swapaxes(C, -1, -2))


def covariance_vec(model, m0, C0, t):
    """Covariance at time ``t`` from initial mean ``m0`` and covariance ``C0``."""
    C0 = _check_psd(C0)
    if t < 0:
        raise InvalidInputError("time must be non-negative")
    d = model.dim
    m0 = np.asarray(m0, dtype=float)
    if t == 0:
        return _symmetrize(C0)
    expF, I1, I2, I3, I4, I5 = _covariance_blocks(model, t)
    b = model.b
    delta = m0 - b
    v = (
        expF @ vec(C0)
        + I1 @ np.kron(delta, delta)
        + I2 @ np.kron(b, delta)
        + I3 @ np.kron(delta, b)
        + I4 @ delta
        + I5 @ vec(sigma_sigma_t(model.diffusion, b))
    )
    return _symmetrize(unvec(v, d, d))


def moments_at(model, m0, C0, t):
    return MomentState(t, mean_at(model, m0, t), covariance_vec(model, m0, C0, t))


def omega_h(model, x, h):
    """Conditional covariance after time ``h`` given the state ``x``."""
    if h <= 0:
        raise InvalidInputError("step must be positive")
    d = model.dim
    return covariance_vec(model, x, np.zeros((d, d)), h)


class OmegaCache:
    """Precomputed pieces of ``omega_h`` for a fixed model and step.

    With ``delta = x - b`` the conditional covariance is
    ``vec(Omega) = Q (delta (x) delta) + L delta + c``, so after building
    ``Q``, ``L`` and ``c`` once each state costs two matrix-vector products.
    """

    def __init__(self, model, h):
        if h <= 0:
            raise InvalidInputError("step must be positive")
        self.model = model
        self.h = float(h)
        d = model.dim
        eye = np.eye(d)
        b = model.b[:, None]
        expF, I1, I2, I3, I4, I5 = _covariance_blocks(model, h)
        self.exp_Ah = expm(model.A * h)
        self.quadratic = I1
        # vec(delta b^T) = (b (x) I) delta and vec(b delta^T) = (I (x) b) delta
        self.linear = I2 @ np.kron(b, eye) + I3 @ np.kron(eye, b) + I4
        self.constant = I5 @ vec(sigma_sigma_t(model.diffusion, model.b))

    def mean(self, x):
        """``mu_h(x) = expm(A h)(x - b) + b`` for a state or stack of states."""
        x = np.asarray(x, dtype=float)
        return (x - self.model.b) @ self.exp_Ah.T + self.model.b

    def omega(self, x):
        """Covariance for a state ``(d,)`` or a stack ``(n, d)``."""
        x = np.asarray(x, dtype=float)
        d = self.model.dim
        delta = x - self.model.b
        outer = (delta[..., :, None] * delta[..., None, :]).reshape(delta.shape[:-1] + (d * d,))
        # delta delta^T is symmetric so row-major and column-major flattening agree
        v = outer @ self.quadratic.T + delta @ self.linear.T + self.constant
        return _symmetrize(unvec(v, d, d))


def precompute_omega_cache(model, h):
    return OmegaCache(model, h)


def generator_apply(drift, spec, phi_grad, phi_hess, x):
    """Apply the generator to a test function at ``x``.

    ``phi_grad(x)`` returns the gradient (length ``d``) and ``phi_hess(x)``
    the Hessian ``(d, d)``. Vector-valued test functions are handled by
    returning a leading axis from both callables.
    """
    x = np.asarray(x, dtype=float)
    F = np.asarray(drift(x), dtype=float)
    S = sigma_sigma_t(spec, x)
    g = np.asarray(phi_grad(x), dtype=float)
    H = np.asarray(phi_hess(x), dtype=float)
    return g @ F + 0.5 * np.sum(H * S, axis=(-2, -1))


def generator_sigma_sigma_t(spec, drift_value, x):
    """Generator applied entrywise to the diffusion matrix.

    For a quadratic diffusion matrix this is
    ``unvec(alpha vec(F x^T + x F^T + S) + beta F)`` where ``F`` is the
    drift value at ``x`` and ``S`` the diffusion matrix at ``x``. Works on
    stacks of states.
    """
    x = np.asarray(x, dtype=float)
    F = np.asarray(drift_value, dtype=float)
    d = spec.dim
    S = sigma_sigma_t(spec, x)
    M = F[..., :, None] * x[..., None, :] + x[..., :, None] * F[..., None, :] + S
    v = vec(M) @ spec.check_alpha.T + F @ spec.check_beta.T
    return unvec(v, d, d)
