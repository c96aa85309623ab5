import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thzdoa.numerics import (
    DimensionError,
    NumericalError,
    banded_toeplitz,
    eig_hermitian,
    solve_regularized,
)


def random_hermitian(n, rng):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X + X.conj().T


def test_identity_eigenvalues():
    e = eig_hermitian(np.eye(4))
    np.testing.assert_allclose(e.eigenvalues, np.ones(4))
    np.testing.assert_allclose(e.eigenvectors.conj().T @ e.eigenvectors, np.eye(4), atol=1e-12)


def test_diagonal_case():
    e = eig_hermitian(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(e.eigenvalues, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(e.eigenvectors), [[0, 1], [1, 0]], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 8, 33])
def test_reconstruction_and_orthonormality(n):
    rng = np.random.default_rng(n)
    A = random_hermitian(n, rng)
    e = eig_hermitian(A)
    U, lam = e.eigenvectors, e.eigenvalues
    assert np.all(np.diff(lam) <= 0)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(n), atol=1e-10)
    recon = U @ np.diag(lam) @ U.conj().T
    assert np.linalg.norm(recon - A) / np.linalg.norm(A) < 1e-9


def test_matches_lapack_eigenvalues():
    rng = np.random.default_rng(5)
    A = random_hermitian(40, rng)
    ref = np.sort(np.linalg.eigvalsh(A))[::-1]
    np.testing.assert_allclose(eig_hermitian(A).eigenvalues, ref, atol=1e-10 * np.abs(ref).max())


def test_rank_deficient_input():
    rng = np.random.default_rng(9)
    a = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    e = eig_hermitian(np.outer(a, a.conj()))
    assert e.eigenvalues[0] == pytest.approx(np.vdot(a, a).real, rel=1e-12)
    assert np.abs(e.eigenvalues[1:]).max() < 1e-12 * e.eigenvalues[0]


def test_symmetrizes_slightly_non_hermitian():
    rng = np.random.default_rng(3)
    A = random_hermitian(6, rng)
    B = A + 1e-10 * rng.standard_normal((6, 6))
    np.testing.assert_allclose(eig_hermitian(B).eigenvalues, eig_hermitian(A).eigenvalues, atol=1e-8)


def test_non_square_rejected():
    with pytest.raises(DimensionError):
        eig_hermitian(np.zeros((3, 4)))


def test_sweep_cap_reports_size():
    A = random_hermitian(5, np.random.default_rng(0))
    with pytest.raises(NumericalError, match="5x5"):
        eig_hermitian(A, max_sweeps=0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 24), seed=st.integers(0, 2**32 - 1), shift=st.floats(-50, 50))
def test_trace_and_shift_properties(n, seed, shift):
    A = random_hermitian(n, np.random.default_rng(seed))
    lam = eig_hermitian(A).eigenvalues
    tr = np.trace(A).real
    assert abs(lam.sum() - tr) <= 1e-8 * max(1.0, np.abs(lam).sum())
    lam_shift = eig_hermitian(A + shift * np.eye(n)).eigenvalues
    np.testing.assert_allclose(lam_shift, lam + shift, atol=1e-9 * max(1.0, np.abs(lam).max(), abs(shift)))


def test_toeplitz_identity():
    np.testing.assert_array_equal(banded_toeplitz([1.0], 3), np.eye(3))


def test_toeplitz_three_band():
    expected = np.array([[1, .5, .2, 0], [.5, 1, .5, .2], [.2, .5, 1, .5], [0, .2, .5, 1]])
    np.testing.assert_array_equal(banded_toeplitz([1, 0.5, 0.2], 4), expected)


def test_toeplitz_reference_coupling_band():
    rng = np.random.default_rng(1)
    mags = np.array([0.85, 0.8, 0.4, 0.2])
    c = np.concatenate(([1.0], mags * np.exp(1j * rng.uniform(-np.pi, np.pi, 4))))
    T = banded_toeplitz(c, 8)
    i, j = np.indices((8, 8))
    assert np.all(T[np.abs(i - j) > 4] == 0)
    assert np.all(T[np.abs(i - j) <= 4] != 0)
    np.testing.assert_allclose(np.abs(np.diag(T, 1)), 0.85)
    np.testing.assert_array_equal(T, T.T)


@settings(max_examples=30, deadline=None)
@given(L=st.integers(1, 6), extra=st.integers(0, 6), seed=st.integers(0, 1000), real=st.booleans())
def test_toeplitz_structure(L, extra, seed, real):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(L) + (0 if real else 1j * rng.standard_normal(L))
    n = L + extra
    T = banded_toeplitz(c, n)
    i, j = np.indices((n, n))
    lag = np.abs(i - j)
    for d in range(n):
        vals = T[lag == d]
        assert np.all(vals == (c[d] if d < L else 0))
    if real:
        np.testing.assert_array_equal(T, T.conj().T)


def test_toeplitz_band_too_wide():
    with pytest.raises(DimensionError):
        banded_toeplitz([1, 2, 3, 4], 3)


def test_solve_identity_and_diagonal():
    np.testing.assert_allclose(solve_regularized(np.eye(2), np.array([1.0, 2.0]), 0.0), [1, 2])
    np.testing.assert_allclose(solve_regularized(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1, 1])


def test_solve_residual():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)) + 5 * np.eye(5)
    b = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    x = solve_regularized(A, b)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-8


def test_solve_unitary_is_adjoint():
    rng = np.random.default_rng(4)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    np.testing.assert_allclose(solve_regularized(Q, b, 0.0), Q.conj().T @ b, atol=1e-10)


def test_ridge_only_on_failure():
    A = np.diag([1.0, 0.0])
    b = np.array([1.0, 1.0])
    x = solve_regularized(A, b, ridge=1e-3)
    np.testing.assert_allclose((A + 1e-3 * np.eye(2)) @ x, b, rtol=1e-12)
    # well-posed systems ignore the ridge entirely
    np.testing.assert_allclose(solve_regularized(np.eye(2), b, ridge=0.5), b)


def test_solve_singular_zero_matrix():
    with pytest.raises(NumericalError):
        solve_regularized(np.zeros((3, 3)), np.ones(3))


def test_solve_shape_checks():
    with pytest.raises(DimensionError):
        solve_regularized(np.eye(3), np.ones(2))
    with pytest.raises(ValueError):
        solve_regularized(np.eye(2), np.ones(2), ridge=-1.0)
