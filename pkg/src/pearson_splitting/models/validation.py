"""Linear validation models with known transition laws."""

import numpy as np

from ..errors import InvalidInputError
from ..moments import LinearPearsonModel, QuadraticDiffusionSpec

__all__ = ["ou_model", "cir_model", "ou_exact_nll"]


def ou_model(lam, m, sigma):
    """Ornstein-Uhlenbeck process ``dX = -lam (X - m) dt + sigma dW``.

    Scalars give the one-dimensional process; a matrix ``lam`` with vector
    ``m`` and matrix ``sigma`` give the multivariate one.
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if lam.shape == (1, 1) and not lam[0, 0] > 0:
        raise InvalidInputError("mean-reversion rate must be positive")
    if np.any(np.linalg.eigvals(lam).real <= 0):
        raise InvalidInputError("mean-reversion matrix must have eigenvalues with positive real part")
    return LinearPearsonModel(-lam, m, QuadraticDiffusionSpec.additive(sigma @ sigma.T))


def cir_model(lam, m, beta):
    """Cox-Ingersoll-Ross process ``dX = -lam (X - m) dt + sqrt(beta X) dW``."""
    if not lam > 0:
        raise InvalidInputError("mean-reversion rate must be positive")
    if not 2 * lam * m >= beta:
        raise InvalidInputError("need 2 lam m >= beta so the origin is not reached")
    spec = QuadraticDiffusionSpec(np.zeros((1, 1)), np.array([[float(beta)]]), np.zeros(1))
    return LinearPearsonModel([[-lam]], [m], spec)


def ou_exact_nll(theta, x, h):
    """Exact Gaussian transition objective of a scalar OU path.

    ``theta = (lam, m, sigma)``. Returns the sum over transitions of
    ``log var + residual^2 / var`` (the same constant-free convention as the
    pseudo-likelihoods).
    """
    lam, m, sigma = theta
    if not lam > 0:
        return np.inf
    x = np.asarray(x, dtype=float).ravel()
    decay = np.exp(-lam * h)
    var = sigma ** 2 * (1 - decay ** 2) / (2 * lam)
    if not var > 0:
        return np.inf
    resid = x[1:] - (m + (x[:-1] - m) * decay)
    return float(np.sum(np.log(var) + resid ** 2 / var))
