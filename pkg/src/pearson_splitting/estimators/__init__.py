"""Pseudo-likelihood objectives: Strang splitting, Euler-Maruyama, Gaussian
approximation and local linearization."""

from ..flows import rk4_flow  # noqa: F401
from .core import (  # noqa: F401
    FLOW_FAILURE,
    INDEFINITE,
    OK,
    ObjectiveValue,
    ObservationSet,
    em_objective,
    ga_objective,
    gaussian_contributions,
    ll_moments,
    ll_objective,
    ss_objective,
)
from .kramers import (  # noqa: F401
    impute_velocity,
    ll_objective_sk_lamperti,
    sk_ga_covariance,
    sk_ga_mean,
)
from .problems import ESTIMATORS, MODELS, make_objective, param_names, unpack  # noqa: F401
