"""Simulation and pseudo-likelihood estimation for multivariate Pearson
diffusions and their nonlinear extensions."""

from .errors import (
    DivergenceError,
    FlowFailureError,
    InvalidInputError,
    PearsonSplittingError,
)
from .linalg import expm, kron, kron_sum, unvec, van_loan_integral, vec
from .moments import (
    LinearPearsonModel,
    QuadraticDiffusionSpec,
    covariance_vec,
    mean_at,
    omega_h,
    precompute_omega_cache,
    sigma_sigma_t,
)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "FlowFailureError",
    "InvalidInputError",
    "LinearPearsonModel",
    "PearsonSplittingError",
    "QuadraticDiffusionSpec",
    "covariance_vec",
    "expm",
    "kron",
    "kron_sum",
    "mean_at",
    "omega_h",
    "precompute_omega_cache",
    "sigma_sigma_t",
    "unvec",
    "van_loan_integral",
    "vec",
]
