"""Dense linear-algebra kernels: matrix exponential, Kronecker algebra,
column-major vectorization and Van Loan block integrals.

Every routine accepts a single matrix or a stack of matrices along the
leading axes where that makes sense, so estimators can evaluate one block
exponential per transition in a single call.
"""

import numpy as np
import scipy.linalg

from .errors import InvalidInputError

__all__ = [
    "expm",
    "kron",
    "kron_sum",
    "vec",
    "unvec",
    "van_loan_integral",
    "phi_integrals",
]


def _as_finite(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def expm(M):
    """Matrix exponential of a square matrix or a stack of square matrices.

    Uses scaling and squaring with a Pade approximant (scipy backend,
    which batches over leading axes).
    """
    M = _as_finite(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise InvalidInputError(f"expm needs square matrices, got shape {M.shape}")
    return scipy.linalg.expm(M)


def kron(A, B):
    """Kronecker product ``A (x) B``."""
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def kron_sum(A, B):
    """Kronecker sum ``A (+) B = A (x) I + I (x) B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] != A.shape[1] or B.shape[0] != B.shape[1]:
        raise InvalidInputError("kron_sum needs square matrices")
    return np.kron(A, np.eye(B.shape[0])) + np.kron(np.eye(A.shape[0]), B)


def vec(M):
    """Stack the columns of ``M`` into one vector.

    For a stack of shape ``(..., r, c)`` each trailing matrix is vectorized.
    """
    M = np.asarray(M)
    if M.ndim < 2:
        raise InvalidInputError("vec needs a matrix")
    return np.swapaxes(M, -1, -2).reshape(M.shape[:-2] + (-1,))


def unvec(v, rows, cols=None):
    """Inverse of :func:`vec`."""
    cols = rows if cols is None else cols
    v = np.asarray(v)
    if v.shape[-1] != rows * cols:
        raise InvalidInputError(
            f"cannot unvec length {v.shape[-1]} into {rows}x{cols}"
        )
    return np.swapaxes(v.reshape(v.shape[:-1] + (cols, rows)), -1, -2)


def van_loan_integral(F, G, H, t):
    """Evaluate ``int_0^t expm(F (t - s)) G expm(H s) ds``.

    The integral is the top-right block of ``expm([[F, G], [0, H]] t)``.
    ``F``, ``G`` and ``H`` may carry a common leading batch shape.
    """
    F = _as_finite(F, "F")
    G = _as_finite(G, "G")
    H = _as_finite(H, "H")
    if G.ndim == 1:
        G = G[:, None]
    n, m = F.shape[-1], H.shape[-1]
    if F.shape[-2] != n or H.shape[-2] != m or G.shape[-2:] != (n, m):
        raise InvalidInputError(
            f"van_loan_integral shapes do not conform: F{F.shape} G{G.shape} H{H.shape}"
        )
    if t < 0:
        raise InvalidInputError("integration horizon must be non-negative")
    if t == 0:
        return np.zeros(np.broadcast_shapes(F.shape[:-2], G.shape[:-2], H.shape[:-2]) + (n, m))
    batch = np.broadcast_shapes(F.shape[:-2], G.shape[:-2], H.shape[:-2])
    block = np.zeros(batch + (n + m, n + m))
    block[..., :n, :n] = F
    block[..., :n, n:] = G
    block[..., n:, n:] = H
    return expm(block * t)[..., :n, n:]


def phi_integrals(J, h):
    """Return ``(R0, h R0 - R1)`` for ``R_r = int_0^h expm(J s) s^r ds``.

    Both come from one exponential of the block matrix
    ``[[J, I, 0], [0, 0, I], [0, 0, 0]] h``. ``J`` may be a stack.
    """
    J = _as_finite(J, "J")
    d = J.shape[-1]
    eye = np.eye(d)
    block = np.zeros(J.shape[:-2] + (3 * d, 3 * d))
    block[..., :d, :d] = J
    block[..., :d, d:2 * d] = eye
    block[..., d:2 * d, 2 * d:] = eye
    E = expm(block * h)
    # top-middle block is R0; top-right is int_0^h e^{J s}(h - s) ds = h R0 - R1
    return E[..., :d, d:2 * d], E[..., :d, 2 * d:]
