import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gibbslab.errors import ParameterError, RangeError
from gibbslab.linalg import (
    SymMatrix,
    gauss_legendre,
    jacobi_eigh,
    numpy_eigh,
    simplex_rule,
    sym_matrix_function,
)


def _sym(n, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    return a + a.T


@given(st.integers(1, 24), st.integers(0, 10_000))
def test_jacobi_matches_lapack(n, seed):
    A = _sym(n, seed)
    dec = jacobi_eigh(A)
    np.testing.assert_allclose(dec.eigenvalues, np.linalg.eigvalsh(A), atol=1e-10 * max(1, np.abs(A).max()))
    np.testing.assert_allclose(dec.reconstruct(), A, atol=1e-10 * np.abs(A).max())
    np.testing.assert_allclose(dec.eigenvectors.T @ dec.eigenvectors, np.eye(n), atol=1e-11)


def test_jacobi_diagonal_and_zero():
    dec = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert list(dec.eigenvalues) == [-1.0, 2.0, 3.0]
    assert np.all(jacobi_eigh(np.zeros((4, 4))).eigenvalues == 0)


def test_jacobi_2x2_closed_form():
    a, b, c = 2.0, 0.7, -1.3
    lam = jacobi_eigh([[a, b], [b, c]]).eigenvalues
    mid, rad = (a + c) / 2, math.hypot((a - c) / 2, b)
    np.testing.assert_allclose(lam, [mid - rad, mid + rad], rtol=1e-14)


def test_symmatrix_rejects_bad_input():
    with pytest.raises(ParameterError):
        SymMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ParameterError):
        SymMatrix(np.ones((2, 3)))
    with pytest.raises(ParameterError):
        SymMatrix(np.array([[np.nan]]))


def test_matrix_function_exp_vs_scipy():
    from scipy.linalg import expm

    A = _sym(7, 3) / 5
    np.testing.assert_allclose(sym_matrix_function(A, np.exp), expm(A), atol=1e-11)
    np.testing.assert_allclose(sym_matrix_function(A, np.exp, eig=numpy_eigh), expm(A), atol=1e-11)


def test_matrix_function_reports_offending_eigenvalue():
    with pytest.raises(RangeError, match="-1"):
        sym_matrix_function(np.diag([1.0, -1.0]), lambda x: 1 / np.sqrt(x))


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(5, 0.0, 2.0)
    assert abs(np.sum(w * x**9) - 2**10 / 10) < 1e-12


@given(st.integers(1, 4), st.floats(0.0, 0.25))
def test_simplex_volume(m, eta):
    rule = simplex_rule(m, eta, 6)
    assert abs(rule.weights.sum() - rule.volume) < 1e-12
    assert np.all(np.diff(rule.nodes, axis=1) < 0)
    assert np.all(rule.nodes >= eta - 1e-15) and np.all(rule.nodes <= 1 - eta + 1e-15)


def test_simplex_polynomial_moment():
    # int over 0 < t2 < t1 < 1 of t1 t2 = 1/8
    rule = simplex_rule(2, 0.0, 6)
    assert abs(np.sum(rule.weights * rule.nodes[:, 0] * rule.nodes[:, 1]) - 1 / 8) < 1e-14


def test_simplex_bad_eta():
    with pytest.raises(ParameterError):
        simplex_rule(2, 0.3)
