"""Dense complex Hermitian linear algebra.

Matrices are plain ``numpy`` complex arrays. The eigensolver is a cyclic
Jacobi iteration, which is accurate and robust for the small (<= 16x16)
operators that appear in steering and joint-measurability problems.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "LinalgError",
    "NotPSDError",
    "ConvergenceError",
    "EigenDecomposition",
    "as_hermitian",
    "is_hermitian",
    "eig_hermitian",
    "restricted_inv_sqrt",
    "psd_check",
    "herm_sqrt",
    "PAULI",
    "IDENTITY2",
]

IDENTITY2 = np.eye(2, dtype=complex)
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class LinalgError(ArithmeticError):
    pass


class NotPSDError(LinalgError, ValueError):
    pass


class ConvergenceError(LinalgError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns


def is_hermitian(m, rtol=1e-12) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    if not np.all(np.isfinite(m)):
        return False
    scale = 1.0 + np.max(np.abs(m), initial=0.0)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= rtol * scale)


def as_hermitian(m, rtol=1e-12) -> np.ndarray:
    """Return ``m`` as a complex array after checking the Hermitian contract."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    if not is_hermitian(arr, rtol):
        raise ValueError("matrix is not Hermitian")
    return arr


def _off_norm(a):
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def eig_hermitian(m, tol=1e-15, max_sweeps=60) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Each rotation first removes the phase of the pivot ``a[p, q]`` and then
    applies a real Givens rotation that zeroes it. Sweeps continue until the
    off-diagonal Frobenius norm drops below ``tol * ||m||_F``.

    Returns eigenvalues in descending order with matching orthonormal
    eigenvector columns.
    """
    a = as_hermitian(m)
    n = a.shape[0]
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return EigenDecomposition(np.real(np.diag(a)).copy(), v)

    threshold = tol * scale
    for _ in range(max_sweeps):
        if _off_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                z = a[p, q]
                mag = abs(z)
                if mag <= 1e-300:
                    continue
                phase = z / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * math.atan2(2.0 * mag, aqq - app)
                c, s = math.cos(theta), math.sin(theta)
                # U = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
                u = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = u.conj().T @ a[idx, :]
                v[:, idx] = v[:, idx] @ u
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    else:
        res = _off_norm(a)
        if res > threshold:
            raise ConvergenceError("Jacobi iteration did not converge", res)

    w = np.real(np.diag(a))
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], v[:, order])


def psd_check(m, tol=1e-10) -> bool:
    """True iff the smallest eigenvalue of ``m`` is at least ``-tol``."""
    w = eig_hermitian(m).eigenvalues
    return bool(w[-1] >= -tol)


def restricted_inv_sqrt(m, rank_tol=1e-9):
    """Inverse square root of a PSD operator on its range.

    Returns ``(proj, inv_sqrt)`` where ``proj`` (rank x dim) has orthonormal
    rows spanning ``range(m)``, ordered by descending eigenvalue, and
    ``inv_sqrt`` is ``(proj m proj^dag)^(-1/2)`` in that basis. Eigenvalues
    below ``rank_tol * lambda_max`` are treated as zero.
    """
    w, v = eig_hermitian(m)
    top = max(w[0], 0.0)
    cut = rank_tol * top if top > 0 else rank_tol
    if w[-1] < -cut:
        raise NotPSDError(f"not positive semidefinite: min eigenvalue {w[-1]:.3e}")
    keep = w > cut
    if not np.any(keep):
        raise NotPSDError("operator is numerically zero")
    proj = v[:, keep].conj().T
    inv_sqrt = np.diag(1.0 / np.sqrt(w[keep])).astype(complex)
    return proj, inv_sqrt


def herm_sqrt(m, rank_tol=1e-9) -> np.ndarray:
    """PSD square root, with eigenvalues below the rank cut set to zero."""
    w, v = eig_hermitian(m)
    top = max(w[0], 0.0)
    if w[-1] < -max(rank_tol * top, rank_tol):
        raise NotPSDError(f"not positive semidefinite: min eigenvalue {w[-1]:.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T
