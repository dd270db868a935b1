"""Plug-in asymptotic standard deviations of the splitting estimator.

Drift parameters converge at rate ``sqrt(N h)`` and diffusion parameters at
rate ``sqrt(N)``; the information matrices are approximated by averages over
a long path simulated at the true parameters.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularInformationError
from .models.kramers import sk_sigma2
from .models.wright_fisher import check_interior, wf_drift_param_jacobian, wf_inverse_diffusion

__all__ = [
    "InfoMatrices",
    "AsymptoticSD",
    "info_wf",
    "info_sk",
    "invert_information",
    "asymptotic_sd",
    "delta_transform",
]


@dataclass(frozen=True)
class InfoMatrices:
    C1: np.ndarray
    C2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "C1", np.atleast_2d(np.asarray(self.C1, dtype=float)))
        C2 = np.asarray(self.C2, dtype=float)
        # models without diffusion parameters carry an empty block
        object.__setattr__(self, "C2", np.atleast_2d(C2) if C2.size else np.zeros((0, 0)))


class AsymptoticSD:
    """Standard deviations for drift (``sd1``) and diffusion (``sd2``) parameters.

    Unpacks as ``sd1, sd2``; ``jitter`` records any diagonal loading used
    to invert the information matrices.
    """

    def __init__(self, sd1, sd2, jitter):
        self.sd1 = sd1
        self.sd2 = sd2
        self.jitter = jitter

    def __iter__(self):
        yield self.sd1
        yield self.sd2

    def concatenated(self):
        return np.concatenate([self.sd1, self.sd2])


def _states(path):
    return np.asarray(getattr(path, "states", path), dtype=float)


def info_wf(path, theta0=None):
    """Drift information for the 15 reduced Wright-Fisher parameters.

    Averages ``(dF/dtheta)^T (diag(x) - x x^T)^{-1} (dF/dtheta)`` along the
    path. The drift is linear in the parameters, so ``theta0`` does not enter;
    it is accepted for interface symmetry.
    """
    X = check_interior(_states(path))
    D = wf_drift_param_jacobian(X)
    W = wf_inverse_diffusion(X)
    C = np.einsum("nai,nab,nbj->ij", D, W, D) / X.shape[0]
    return 0.5 * (C + C.T)


def info_sk(path, theta0):
    """``(C1, C2)`` for ``(eta, a, b, c, d)`` and ``(alpha, beta, gamma)``."""
    Z = _states(path)
    x, v = Z[:, 0], Z[:, 1]
    s2 = sk_sigma2(theta0, v)
    if np.any(s2 <= 0):
        raise InvalidInputError("noise variance must be positive along the path")
    g = np.column_stack([-v, x ** 3, x ** 2, x, np.ones_like(x)])
    C1 = np.einsum("ni,nj->ij", g / s2[:, None], g) / x.size
    w = np.column_stack([v ** 2, v, np.ones_like(v)])
    C2 = 0.5 * np.einsum("ni,nj->ij", w / (s2 ** 2)[:, None], w) / v.size
    return InfoMatrices(0.5 * (C1 + C1.T), 0.5 * (C2 + C2.T))


def invert_information(C):
    """Inverse through Cholesky; on failure retry once with diagonal jitter.

    Returns ``(inverse, jitter)``.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.size == 0:
        return C.copy(), 0.0
    eye = np.eye(C.shape[0])
    for jitter in (0.0, 1e-10 * np.trace(C) / C.shape[0]):
        try:
            L = np.linalg.cholesky(C + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        Linv = np.linalg.solve(L, eye)
        return Linv.T @ Linv, float(jitter)
    raise SingularInformationError("information matrix is not positive definite")


def asymptotic_sd(info, N, h):
    if not (N > 0 and h > 0):
        raise InvalidInputError("N and h must be positive")
    inv1, j1 = invert_information(info.C1)
    inv2, j2 = invert_information(info.C2)
    sd1 = np.sqrt(np.diag(inv1) / (N * h))
    sd2 = np.sqrt(np.diag(inv2) / N)
    return AsymptoticSD(sd1, sd2, max(j1, j2))


def delta_transform(J, cov):
    """Covariance of ``J theta + c`` given the covariance of ``theta``."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if J.shape[1] != cov.shape[0] or cov.shape[0] != cov.shape[1]:
        raise InvalidInputError(f"cannot transform covariance {cov.shape} with Jacobian {J.shape}")
    out = J @ cov @ J.T
    return 0.5 * (out + out.T)
