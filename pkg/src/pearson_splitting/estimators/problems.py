"""Objective functions of the parameter vector for each model and estimator.

``make_objective(model, estimator, data)`` returns a callable
``theta -> ObjectiveValue``. Empirical moments used by the splitting are
computed once from the data and stay fixed while ``theta`` varies.
"""

import numpy as np

from ..errors import InvalidInputError
from ..models.kramers import (
    SkParams,
    sk_diffusion_spec,
    sk_drift,
    sk_drift_hessian,
    sk_drift_jacobian,
    sk_split,
)
from ..models.split import SplitNonlinearModel
from ..models.validation import ou_exact_nll, ou_model
from ..models.wright_fisher import (
    WfParams,
    check_interior,
    wf_diffusion_spec,
    wf_drift,
    wf_drift_hessian,
    wf_drift_jacobian,
    wf_split,
)
from .core import (
    INDEFINITE,
    ObjectiveValue,
    em_objective,
    ga_objective,
    ll_objective,
    ss_objective,
)
from .kramers import ll_objective_sk_lamperti, sk_ga_covariance

__all__ = ["ESTIMATORS", "MODELS", "make_objective", "param_names", "unpack"]

ESTIMATORS = ("ss", "em", "ga", "ll")
MODELS = ("wf", "sk", "ou")

OU_NAMES = ("lambda", "m", "sigma")


def param_names(model):
    if model == "wf":
        return list(WfParams.names)
    if model == "sk":
        return list(SkParams.names)
    if model == "ou":
        return list(OU_NAMES)
    raise InvalidInputError(f"unknown model {model!r}")


def unpack(model, theta):
    if model == "wf":
        return WfParams.from_vector(theta)
    if model == "sk":
        return SkParams.from_vector(theta)
    if model == "ou":
        lam, m, sigma = np.asarray(theta, dtype=float)
        return ou_model(lam, m, sigma)
    raise InvalidInputError(f"unknown model {model!r}")


def _invalid(n):
    return ObjectiveValue(np.inf, np.full(n, np.nan), INDEFINITE)


def _guard(build, n):
    """Evaluate, mapping parameter-validation errors to the sentinel."""
    def fn(theta):
        try:
            return build(np.asarray(theta, dtype=float))
        except InvalidInputError:
            return _invalid(n)
    return fn


def _wf(estimator, data):
    check_interior(data.states)
    spec = wf_diffusion_spec()
    mean = data.states.mean(axis=0)

    def generic(p):
        return (lambda x: wf_drift(p, x), lambda x: wf_drift_jacobian(p, x),
                lambda x: wf_drift_hessian(p, x))

    if estimator == "ss":
        return lambda th: ss_objective(wf_split(WfParams.from_vector(th), mean), data)
    if estimator == "em":
        return lambda th: em_objective(generic(WfParams.from_vector(th))[0], spec, data)
    if estimator == "ga":
        return lambda th: ga_objective(*generic(WfParams.from_vector(th)), spec, data, order=2)
    return lambda th: ll_objective(*generic(WfParams.from_vector(th)), spec, data)


def _sk(estimator, data):
    x = data.states[:, 0]
    mean_x, var_x = float(x.mean()), float(x.var())

    if estimator == "ss":
        return lambda th: ss_objective(sk_split(SkParams.from_vector(th), mean_x, var_x), data)
    if estimator == "em":
        def em(th):
            p = SkParams.from_vector(th)
            # position has no noise at first order; use the velocity equation only
            return em_objective(lambda z: sk_drift(p, z), sk_diffusion_spec(p), data, rows=[1])
        return em
    if estimator == "ga":
        def ga(th):
            p = SkParams.from_vector(th)
            return ga_objective(
                lambda z: sk_drift(p, z), lambda z: sk_drift_jacobian(p, z),
                lambda z: sk_drift_hessian(p, z), sk_diffusion_spec(p), data,
                order=3, covariance=lambda z: sk_ga_covariance(p, z, data.h),
            )
        return ga
    return lambda th: ll_objective_sk_lamperti(SkParams.from_vector(th), data)


def _ou(estimator, data):
    if estimator == "exact":
        def exact(th):
            value = ou_exact_nll(th, data.states[:, 0], data.h)
            return ObjectiveValue(value, np.full(data.n, np.nan), "ok" if np.isfinite(value) else INDEFINITE)
        return exact

    def linear(th):
        return ou_model(*th)

    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    zero_jac = lambda x: np.zeros(np.shape(x) + (1,))  # noqa: E731
    zero_hess = lambda x: np.zeros(np.shape(x) + (1, 1))  # noqa: E731

    def identity_flow(x, h):
        x = np.asarray(x, dtype=float)
        return x, np.broadcast_to(np.eye(1), x.shape + (1,))

    if estimator == "ss":
        return lambda th: ss_objective(SplitNonlinearModel(linear(th), zero, zero_jac, identity_flow), data)
    if estimator == "em":
        return lambda th: (lambda m: em_objective(m.drift, m.diffusion, data))(linear(th))
    if estimator == "ga":
        def ga(th):
            m = linear(th)
            return ga_objective(m.drift, lambda x: np.broadcast_to(m.A, np.shape(x) + (1,)),
                                zero_hess, m.diffusion, data)
        return ga

    def ll(th):
        m = linear(th)
        return ll_objective(m.drift, lambda x: np.broadcast_to(m.A, np.shape(x) + (1,)),
                            zero_hess, m.diffusion, data)
    return ll


def make_objective(model, estimator, data):
    """Return ``theta -> ObjectiveValue`` for the chosen model and estimator."""
    if model == "ou":
        allowed = ESTIMATORS + ("exact",)
    else:
        allowed = ESTIMATORS
    if estimator not in allowed:
        raise InvalidInputError(f"unknown estimator {estimator!r} for model {model!r}")
    if model == "wf":
        build = _wf(estimator, data)
    elif model == "sk":
        build = _sk(estimator, data)
    elif model == "ou":
        if data.d != 1:
            raise InvalidInputError("the OU validation model is one-dimensional")
        build = _ou(estimator, data)
    else:
        raise InvalidInputError(f"unknown model {model!r}")
    return _guard(build, data.n)
