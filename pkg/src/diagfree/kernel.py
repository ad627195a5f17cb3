"""Dense complex matrix substrate.

Matrices are plain 2-D ``numpy`` arrays. Diagonal matrices are stored as
1-D arrays of their diagonal entries; :func:`diag_matrix` converts back.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

HERMITIAN_RTOL = 1e-10


class NotHermitianError(ValueError):
    pass


class DegenerateTransformError(ZeroDivisionError):
    """Raised when a diagonal Stieltjes transform has a vanishing entry."""

    def __init__(self, index: int):
        super().__init__(f"G has a zero entry at index {index}")
        self.index = index


def as_matrix(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def diag_matrix(d) -> np.ndarray:
    return np.diag(np.asarray(d))


def as_upper_diagonal(lam, n: int | None = None) -> np.ndarray:
    """Validate (and broadcast a scalar to) an element of the upper half D+."""
    lam = np.asarray(lam, dtype=complex)
    if lam.ndim == 0:
        if n is None:
            raise ValueError("dimension required to broadcast a scalar")
        lam = np.full(n, lam)
    if lam.ndim != 1 or (n is not None and lam.shape[0] != n):
        raise ValueError(f"expected a length-{n} diagonal, got shape {lam.shape}")
    if not np.all(lam.imag > 0):
        raise ValueError("diagonal is not in the upper half-plane D+")
    return lam


def is_hermitian(M, rtol: float = HERMITIAN_RTOL) -> bool:
    M = np.asarray(M)
    scale = np.linalg.norm(M)
    if scale == 0:
        return True
    return np.linalg.norm(M - M.conj().T) <= rtol * scale


def check_hermitian(M, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    M = as_matrix(M)
    if not is_hermitian(M, rtol):
        raise NotHermitianError("matrix is not self-adjoint within tolerance")
    return M


def hermitize(M) -> np.ndarray:
    """Return (M + M*)/2, which is exactly self-adjoint in floating point."""
    M = np.asarray(M)
    return (M + M.conj().T) / 2


def delta(M) -> np.ndarray:
    """The diagonal map: keep the diagonal of ``M`` (returned as a vector)."""
    return np.diagonal(as_matrix(M)).copy()


def stieltjes_diag(X, lam) -> np.ndarray:
    """Diagonal of the resolvent ``(Lambda - X)^-1`` for ``Lambda`` in D+.

    Computed from an LU factorisation of ``Lambda - X`` solved against the
    identity.
    """
    X = np.asarray(X)
    n = X.shape[0]
    lam = as_upper_diagonal(lam, n)
    A = -X.astype(complex, copy=True)
    A[np.diag_indices(n)] += lam
    lu, piv = scipy.linalg.lu_factor(A, overwrite_a=True, check_finite=False)
    Z = scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=complex), overwrite_b=True, check_finite=False)
    g = np.diagonal(Z).copy()
    if not np.all(np.isfinite(g)):
        raise np.linalg.LinAlgError("resolvent solve failed: Lambda - X is singular")
    return g


def h_transform(X, lam, g=None) -> np.ndarray:
    """``G_X(Lambda)^-1 - Lambda``; pass ``g`` to reuse a computed transform."""
    lam = as_upper_diagonal(lam, np.shape(X)[0])
    if g is None:
        g = stieltjes_diag(X, lam)
    zero = np.flatnonzero(g == 0)
    if zero.size:
        raise DegenerateTransformError(int(zero[0]))
    return 1.0 / g - lam


def schatten_moment(M, p: int) -> float:
    """``(1/N) Tr[(M M*)^p]``."""
    if p < 1:
        raise ValueError("p must be a positive integer")
    M = as_matrix(M)
    if p == 1:
        return float(np.sum(np.abs(M) ** 2) / M.shape[0])
    s = np.linalg.svd(M, compute_uv=False)
    return float(np.sum(s ** (2 * p)) / M.shape[0])


def schatten_norm(M, p: int) -> float:
    return schatten_moment(M, p) ** (1.0 / (2 * p))


def diagonal_schatten_moment(d, p: int) -> float:
    """Schatten moment of a diagonal matrix given by its entries."""
    if p < 1:
        raise ValueError("p must be a positive integer")
    d = np.asarray(d)
    return float(np.mean(np.abs(d) ** (2 * p)))


def hermitian_eigenvalues(M) -> np.ndarray:
    M = check_hermitian(M)
    return np.linalg.eigvalsh(M)


def hadamard(A, B) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A * B


def operator_norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M), 2))
