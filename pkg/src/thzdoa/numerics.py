"""Dense complex-matrix kernel: Hermitian eigensolver, banded Toeplitz
assembly and a ridge-guarded linear solve.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.
"""
from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np


class DimensionError(ValueError):
    """Raised when matrix or vector shapes are incompatible."""


class NumericalError(ArithmeticError):
    """Raised when an iterative kernel fails to converge or a solve is singular."""


class HermEig(NamedTuple):
    """Eigenpairs of a Hermitian matrix, eigenvalues in descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


MAX_SWEEPS = 100
OFF_TOL = 1e-12


@numba.njit(cache=True, nogil=True)
def _jacobi_sweeps(a, v, tol, max_sweeps):
    n = a.shape[0]
    fro2 = 0.0
    for i in range(n):
        for j in range(n):
            fro2 += a[i, j].real ** 2 + a[i, j].imag ** 2
    thresh2 = (tol * tol) * fro2

    for sweep in range(max_sweeps + 1):
        off2 = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off2 += 2.0 * (a[i, j].real ** 2 + a[i, j].imag ** 2)
        if off2 <= thresh2:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                app = a[p, p].real
                aqq = a[q, q].real
                # phase removal turns the 2x2 block real symmetric
                ph = apq / mag
                tau = (aqq - app) / (2.0 * mag)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # unitary J = diag(1, conj(ph)) @ [[c, s], [-s, c]]
                jpp = c + 0j
                jpq = s + 0j
                jqp = -s * np.conj(ph)
                jqq = c * np.conj(ph)
                for i in range(n):
                    xp = a[i, p]
                    xq = a[i, q]
                    a[i, p] = xp * jpp + xq * jqp
                    a[i, q] = xp * jpq + xq * jqq
                for i in range(n):
                    xp = a[p, i]
                    xq = a[q, i]
                    a[p, i] = np.conj(jpp) * xp + np.conj(jqp) * xq
                    a[q, i] = np.conj(jpq) * xp + np.conj(jqq) * xq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for i in range(n):
                    xp = v[i, p]
                    xq = v[i, q]
                    v[i, p] = xp * jpp + xq * jqp
                    v[i, q] = xp * jpq + xq * jqq
    return -1


def eig_hermitian(A, tol: float = OFF_TOL, max_sweeps: int = MAX_SWEEPS) -> HermEig:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    The input is symmetrized as ``(A + A^H) / 2`` before iterating. Sweeps
    stop once the off-diagonal Frobenius norm falls below ``tol`` times the
    Frobenius norm of the input.

    Args:
        A: Square Hermitian matrix.
        tol: Relative off-diagonal tolerance.
        max_sweeps: Sweep cap.

    Returns:
        HermEig with eigenvalues sorted in descending order and the matching
        orthonormal eigenvectors as columns. Ties keep their sweep order.

    Raises:
        DimensionError: If ``A`` is not square.
        NumericalError: If the sweep cap is reached first.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"eig_hermitian needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"non-finite entries in {n}x{n} matrix")
    work = np.ascontiguousarray(0.5 * (A + A.conj().T), dtype=np.complex128)
    vecs = np.eye(n, dtype=np.complex128)
    if n == 0:
        return HermEig(np.zeros(0), vecs)
    sweeps = _jacobi_sweeps(work, vecs, tol, max_sweeps)
    if sweeps < 0:
        raise NumericalError(
            f"Jacobi eigensolver did not converge for {n}x{n} matrix after {max_sweeps} sweeps"
        )
    vals = work.diagonal().real.copy()
    order = np.argsort(-vals, kind="stable")
    return HermEig(vals[order], vecs[:, order])


def banded_toeplitz(coeffs, n: int) -> np.ndarray:
    """Symmetric banded Toeplitz matrix with ``M[i, j] = coeffs[|i - j|]``.

    Entries with ``|i - j| >= len(coeffs)`` are zero. Note the matrix is
    symmetric (not conjugate-symmetric) for complex coefficients.
    """
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.complex128))
    L = coeffs.size
    if L < 1:
        raise DimensionError("banded_toeplitz needs at least one coefficient")
    if L > n:
        raise DimensionError(f"band of {L} coefficients does not fit a {n}x{n} matrix")
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    out = np.zeros((n, n), dtype=np.complex128)
    inside = lag < L
    out[inside] = coeffs[lag[inside]]
    return out


def default_ridge(A) -> float:
    n = A.shape[0]
    return 1e-10 * abs(np.trace(A).real) / n


def solve_regularized(A, b, ridge: float | None = None) -> np.ndarray:
    """Solve ``A x = b``, falling back to ``(A + ridge I) x = b`` on failure.

    The ridge is only used when the direct solve reports a singular matrix or
    returns non-finite values. ``ridge=None`` selects
    ``1e-10 * trace(A) / n``.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"solve needs a square matrix, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise DimensionError(f"right-hand side length {b.shape[0]} != {A.shape[0]}")
    if ridge is not None and ridge < 0:
        raise ValueError("ridge must be non-negative")
    try:
        x = np.linalg.solve(A, b)
        if np.all(np.isfinite(x)):
            return x
    except np.linalg.LinAlgError:
        pass
    r = default_ridge(A) if ridge is None else ridge
    if r == 0:
        raise NumericalError("singular system and zero ridge")
    try:
        x = np.linalg.solve(A + r * np.eye(A.shape[0]), b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"system singular even with ridge {r:g}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"system singular even with ridge {r:g}")
    return x
