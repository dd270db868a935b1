"""Kramers-oscillator specific pieces of the estimators."""

import numpy as np

from ..errors import InvalidInputError
from ..models.kramers import (
    lamperti,
    lamperti_drift,
    lamperti_drift_jacobian,
    lamperti_drift_hessian,
    sk_sigma2,
)
from ..moments import QuadraticDiffusionSpec
from .core import FLOW_FAILURE, ObjectiveValue, ObservationSet, ll_objective

__all__ = ["sk_ga_mean", "sk_ga_covariance", "ll_objective_sk_lamperti", "impute_velocity"]


def sk_ga_mean(p, z, h):
    """Second-order generator expansion of the conditional mean."""
    z = np.asarray(z, dtype=float)
    x, v = z[..., 0], z[..., 1]
    u1 = -(((p.a * x + p.b) * x + p.c) * x + p.d)  # U'(x)
    u2 = -((3 * p.a * x + 2 * p.b) * x + p.c)  # U''(x)
    drag = p.eta * v + u1
    m1 = x + h * v - 0.5 * h * h * drag
    m2 = v - h * drag + 0.5 * h * h * (p.eta ** 2 * v + p.eta * u1 - u2 * v)
    return np.stack([m1, m2], axis=-1)


def sk_ga_covariance(p, z, h):
    """Conditional covariance expanded to third order in ``h``.

    The plain second-order covariance is singular for this hypoelliptic
    model; one more order makes the position block ``h^3/3 sigma^2(v)``.
    """
    z = np.asarray(z, dtype=float)
    x, v = z[..., 0], z[..., 1]
    eta, a, b, c, d = p.eta, p.a, p.b, p.c, p.d
    al, be, ga = p.alpha, p.beta, p.gamma
    s2 = v * (v * al + be) + ga
    h2, h3 = h * h / 2, h ** 3 / 6

    common = (2 * b * v * x ** 2 * al + 2 * a * v * x ** 3 * al + v ** 2 * al ** 2
              + b * x ** 2 * be + a * x ** 3 * be + v * al * be + d * (2 * v * al + be)
              + c * x * (2 * v * al + be) + al * ga)
    o11 = h ** 3 / 3 * s2
    o12 = h2 * s2 + h3 * (common - (5 * v ** 2 * al + 4 * v * be + 3 * ga) * eta)
    t3 = (2 * d ** 2 * al + 8 * b * v ** 2 * x * al + 12 * a * v ** 2 * x ** 2 * al
          + 2 * b ** 2 * x ** 4 * al + 4 * a * b * x ** 5 * al + 2 * a ** 2 * x ** 6 * al
          + 2 * b * v * x ** 2 * al ** 2 + 2 * a * v * x ** 3 * al ** 2 + v ** 2 * al ** 3
          + 6 * b * v * x * be + 9 * a * v * x ** 2 * be + b * x ** 2 * al * be
          + a * x ** 3 * al * be + v * al ** 2 * be
          + d * al * (4 * x * (c + x * (b + a * x)) + 2 * v * al + be)
          + 4 * b * x * ga + 6 * a * x ** 2 * ga + al ** 2 * ga + 2 * c ** 2 * x ** 2 * al
          - d * (10 * v * al + 3 * be) * eta
          - (b * x ** 2 * (10 * v * al + 3 * be) + a * x ** 3 * (10 * v * al + 3 * be)
             + al * (6 * v ** 2 * al + 5 * v * be + 4 * ga)) * eta
          + c * (4 * v ** 2 * al + 4 * x ** 3 * (b + a * x) * al + 3 * v * be + x * al * be
                 + 2 * ga + 2 * v * x * al * (al - 5 * eta) - 3 * x * be * eta)
          + (12 * v ** 2 * al + 7 * v * be + 4 * ga) * eta ** 2)
    o22 = h * s2 + h2 * (common - (4 * v ** 2 * al + 3 * v * be + 2 * ga) * eta) + h3 * t3
    out = np.empty(z.shape[:-1] + (2, 2))
    out[..., 0, 0] = o11
    out[..., 0, 1] = o12
    out[..., 1, 0] = o12
    out[..., 1, 1] = o22
    return out


_UNIT_VELOCITY_NOISE = QuadraticDiffusionSpec.additive([[0.0, 0.0], [0.0, 1.0]])


def ll_objective_sk_lamperti(p, data):
    """Local linearization after mapping velocity to unit-noise coordinates.

    The change of variables ``u = psi(v)`` contributes
    ``-2 sum_k log psi'(V_k) = sum_k log sigma^2(V_k)`` to the objective.
    """
    n = data.n
    if not (p.alpha > 0 and p.discriminant > 0):
        return ObjectiveValue(np.inf, np.full(n, np.nan), FLOW_FAILURE)
    states = data.states
    y = np.column_stack([states[:, 0], lamperti(p, states[:, 1])])
    transformed = ObservationSet(data.h, y)
    result = ll_objective(
        lambda s: lamperti_drift(p, s),
        lambda s: lamperti_drift_jacobian(p, s),
        lambda s: lamperti_drift_hessian(p, s),
        _UNIT_VELOCITY_NOISE,
        transformed,
    )
    if not result.ok:
        return result
    jac = np.log(sk_sigma2(p, states[1:, 1]))
    terms = result.per_transition + jac
    value = float(terms.sum())
    if not np.isfinite(value):
        return ObjectiveValue(np.inf, terms, FLOW_FAILURE)
    return ObjectiveValue(value, terms, result.status)


def impute_velocity(x_series, h):
    """Pair positions with forward-difference velocities; the last sample is dropped."""
    x = np.asarray(x_series, dtype=float).ravel()
    if x.size < 4:
        # three samples would leave a single transition
        raise InvalidInputError("need at least four samples to impute velocity")
    if not h > 0:
        raise InvalidInputError("step must be positive")
    v = np.diff(x) / h
    return ObservationSet(h, np.column_stack([x[:-1], v]))
