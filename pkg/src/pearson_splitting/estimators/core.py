"""Gaussian pseudo-likelihood objectives.

Every objective returns, per transition, ``log det Omega + Z^T Omega^{-1} Z``
for some approximate conditional mean and covariance; the ``d log(2 pi)``
constant is dropped everywhere so values are comparable across estimators.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import FlowFailureError, InvalidInputError
from ..linalg import expm, phi_integrals
from ..moments import generator_sigma_sigma_t, precompute_omega_cache, sigma_sigma_t

__all__ = [
    "ObservationSet",
    "ObjectiveValue",
    "OK",
    "INDEFINITE",
    "FLOW_FAILURE",
    "gaussian_contributions",
    "ss_objective",
    "em_objective",
    "ga_objective",
    "ll_objective",
    "ll_moments",
]

OK = "ok"
INDEFINITE = "indefinite-covariance"
FLOW_FAILURE = "flow-failure"


@dataclass(frozen=True)
class ObservationSet:
    """Equally spaced observations ``X_{t_0}, ..., X_{t_N}``."""

    h: float
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if not self.h > 0:
            raise InvalidInputError("observation step must be positive")
        if states.shape[0] < 3:
            raise InvalidInputError("need at least two transitions")
        if not np.all(np.isfinite(states)):
            raise InvalidInputError("observations must be finite")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "states", states)

    @classmethod
    def from_path(cls, path):
        return cls(path.h, path.states)

    @property
    def d(self):
        return self.states.shape[1]

    @property
    def n(self):
        return self.states.shape[0] - 1

    @property
    def previous(self):
        return self.states[:-1]

    @property
    def current(self):
        return self.states[1:]


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    per_transition: np.ndarray
    status: str = OK

    @property
    def ok(self):
        return self.status == OK

    def __float__(self):
        return float(self.value)


def _failed(n, status):
    return ObjectiveValue(np.inf, np.full(n, np.nan), status)


def gaussian_contributions(Z, Omega):
    """``log det Omega_k + Z_k^T Omega_k^{-1} Z_k`` for each transition.

    Returns ``(terms, status)``; non-positive-definite covariances give
    ``nan`` entries and the indefinite status.
    """
    n = Z.shape[0]
    if not (np.all(np.isfinite(Omega)) and np.all(np.isfinite(Z))):
        return np.full(n, np.nan), FLOW_FAILURE
    try:
        L = np.linalg.cholesky(Omega)
    except np.linalg.LinAlgError:
        terms = np.full(n, np.nan)
        for k in range(n):
            try:
                Lk = np.linalg.cholesky(Omega[k])
            except np.linalg.LinAlgError:
                continue
            w = np.linalg.solve(Lk, Z[k])
            terms[k] = 2 * np.log(np.diag(Lk)).sum() + w @ w
        return terms, INDEFINITE
    w = np.linalg.solve(L, Z[..., None])[..., 0]
    logdet = 2 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)
    return logdet + np.einsum("ni,ni->n", w, w), OK


def _finish(terms, status, extra=None):
    if status != OK:
        return ObjectiveValue(np.inf, terms, status)
    if extra is not None:
        terms = terms + extra
    value = float(terms.sum())
    if not np.isfinite(value):
        return ObjectiveValue(np.inf, terms, FLOW_FAILURE)
    return ObjectiveValue(value, terms, OK)


def ss_objective(model, data, theta=None, include_jacobian=True):
    """Strang splitting objective.

    ``model`` is a :class:`SplitNonlinearModel`, or a callable returning one
    when ``theta`` is given. Observations are pushed half a step backwards
    through the nonlinear flow, compared with the exact linear-SDE mean of the
    forward half-step image of the previous state, and weighted by the exact
    linear-SDE covariance. The Jacobian of the backward flow enters through
    ``-2 log |det Df_{-h/2}(X_k)|``.
    """
    if theta is not None:
        model = model(theta)
    h = data.h
    n = data.n
    try:
        fwd, _ = model.flow_map(data.previous, 0.5 * h)
        back, Dback = model.flow_map(data.current, -0.5 * h)
    except FlowFailureError:
        return _failed(n, FLOW_FAILURE)
    with np.errstate(all="ignore"):
        try:
            cache = precompute_omega_cache(model.linear, h)
        except (ValueError, np.linalg.LinAlgError):
            return _failed(n, FLOW_FAILURE)
        Z = back - cache.mean(fwd)
        Omega = cache.omega(fwd)
        terms, status = gaussian_contributions(Z, Omega)
        extra = None
        if include_jacobian:
            sign, logabs = np.linalg.slogdet(Dback)
            if np.any(sign == 0):
                return _failed(n, FLOW_FAILURE)
            extra = -2.0 * logabs
    return _finish(terms, status, extra)


def _restrict(Z, Omega, rows):
    if rows is None:
        return Z, Omega
    rows = np.asarray(rows)
    return Z[:, rows], Omega[:, rows[:, None], rows[None, :]]


def em_objective(drift, spec, data, rows=None):
    """Euler-Maruyama objective: mean ``x + h F(x)``, covariance ``h S(x)``.

    ``rows`` keeps a subset of coordinates, used for hypoelliptic models
    where some coordinates carry no noise at first order.
    """
    h = data.h
    X0 = data.previous
    with np.errstate(all="ignore"):
        mu = X0 + h * drift(X0)
        Omega = h * sigma_sigma_t(spec, X0)
        Z, Omega = _restrict(data.current - mu, Omega, rows)
        terms, status = gaussian_contributions(Z, Omega)
    return _finish(terms, status)


def _second_order_drift(F, J, H, S):
    """Generator applied to the drift: ``J F + 1/2 sum_ij H_ij S_ij``."""
    return np.einsum("nij,nj->ni", J, F) + 0.5 * np.einsum("nmij,nij->nm", H, S)


def ga_objective(drift, drift_jacobian, drift_hessian, spec, data, order=2, covariance=None):
    """Gaussian approximation from the generator expansion.

    Mean ``x + h F + h^2/2 LF``. With ``order = 2`` the covariance is
    ``h S + h^2/2 (J S + S J^T + L S)``. Higher orders need a caller-supplied
    ``covariance(x)``; one is available for the Kramers oscillator.
    """
    if order not in (2, 3):
        raise InvalidInputError("order must be 2 or 3")
    if order == 3 and covariance is None:
        raise InvalidInputError("third-order covariance must be supplied by the model")
    h = data.h
    X0 = data.previous
    with np.errstate(all="ignore"):
        F = drift(X0)
        J = drift_jacobian(X0)
        S = sigma_sigma_t(spec, X0)
        LF = _second_order_drift(F, J, drift_hessian(X0), S)
        mu = X0 + h * F + 0.5 * h * h * LF
        if covariance is not None:
            Omega = covariance(X0)
        else:
            JS = J @ S
            LS = generator_sigma_sigma_t(spec, F, X0)
            Omega = h * S + 0.5 * h * h * (JS + np.swapaxes(JS, -1, -2) + LS)
        terms, status = gaussian_contributions(data.current - mu, Omega)
    return _finish(terms, status)


def ll_moments(F, J, H, S, X0, h):
    """Local-linearization mean and covariance for a stack of states.

    The drift is linearized around each state, ``F(y) ~ F(x) + J (y - x)
    + M t`` with ``M = 1/2 sum_ij H_ij S_ij``, and the diffusion is frozen at
    ``S(x)``. Both moments come from block matrix exponentials.
    """
    d = X0.shape[-1]
    M = 0.5 * np.einsum("nmij,nij->nm", H, S)
    R0, hR0_R1 = phi_integrals(J, h)
    mu = X0 + np.einsum("nij,nj->ni", R0, F) + np.einsum("nij,nj->ni", hR0_R1, M)
    block = np.zeros(J.shape[:-2] + (2 * d, 2 * d))
    block[..., :d, :d] = J
    block[..., :d, d:] = S
    block[..., d:, d:] = -np.swapaxes(J, -1, -2)
    E = expm(block * h)
    # int_0^h e^{J(h-s)} S e^{-J^T s} ds, times e^{J^T h}
    Omega = E[..., :d, d:] @ np.swapaxes(E[..., :d, :d], -1, -2)
    return mu, 0.5 * (Omega + np.swapaxes(Omega, -1, -2))


def ll_objective(drift, drift_jacobian, drift_hessian, spec, data, current=None):
    """Ozaki local-linearization objective.

    ``current`` overrides the observed end points (used after a change of
    variables).
    """
    h = data.h
    X0 = data.previous
    X1 = data.current if current is None else current
    n = data.n
    with np.errstate(all="ignore"):
        F = drift(X0)
        J = drift_jacobian(X0)
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(J))):
            return _failed(n, FLOW_FAILURE)
        S = sigma_sigma_t(spec, X0)
        try:
            mu, Omega = ll_moments(F, J, drift_hessian(X0), S, X0, h)
        except (ValueError, np.linalg.LinAlgError, OverflowError):
            return _failed(n, FLOW_FAILURE)
        terms, status = gaussian_contributions(X1 - mu, Omega)
    return _finish(terms, status)
