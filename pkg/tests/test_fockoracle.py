import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbslab.errors import ResourceCapError
from gibbslab.expansion import ExpansionConfig, Interaction, Observable, coefficient, f_value
from gibbslab.fockoracle import (
    FockOperator,
    FockSpace,
    TruncationWarning,
    duhamel_time_product,
    exact_coefficients,
    exact_correlation,
    full_state_expectation,
    hamiltonians,
    ladder,
    mode_observable,
    number_operator,
    quasi_free_expectation,
    wick_check,
)
from gibbslab.spectral import bose_green, build_basis

B1 = build_basis(1, 1, 4.0)
W1 = Interaction.fejer(1, 2, 0.5)
WP = Interaction.fejer(1, 2, 0.5, "plain")


@pytest.fixture(scope="module")
def fs8():
    return FockSpace(B1, 8)


def test_dimension_and_sectors(fs8):
    assert fs8.dim == math.comb(11, 3)
    for n, s in enumerate(fs8.sectors()):
        assert np.all(fs8.totals[s] == n)
    assert fs8.index((0, 0, 0)) == 0


def test_dimension_cap():
    with pytest.raises(ResourceCapError):
        FockSpace(build_basis(1, 3, 1.0), 10, dim_cap=100)


def test_ccr_below_cap(fs8):
    b = ladder(fs8, 1, "annihilate").matrix
    bd = ladder(fs8, 1, "create").matrix
    comm = b @ bd - bd @ b
    low = fs8.totals < fs8.cap
    np.testing.assert_allclose(comm[np.ix_(low, low)], np.eye(low.sum()), atol=1e-12)


def test_hamiltonians_hermitian(fs8):
    for regime_w in (W1, WP):
        h = hamiltonians(fs8, 2.0, regime_w)
        assert h.H0.hermitian and h.W.hermitian and h.Wplain.hermitian


def test_two_point_is_bose(fs8):
    lam = B1.eigenvalues[1]
    got = quasi_free_expectation(FockSpace(B1, 20, dim_cap=10**5), 1.0, [(1, 1), (1, -1)], check=False)
    assert abs(got - bose_green(lam, 1.0)) < 1e-12


@given(st.lists(st.sampled_from([0, 1, 2]), min_size=1, max_size=3))
def test_wick_on_balanced_words(modes):
    fs = FockSpace(build_basis(1, 1, 8.0), 8)
    word = [(k, 1) for k in modes] + [(k, -1) for k in reversed(modes)]
    assert wick_check(fs, 1.0, word).gap < 1e-9


def test_truncation_warning():
    fs = FockSpace(build_basis(1, 0, 0.5), 2)
    with pytest.warns(TruncationWarning):
        quasi_free_expectation(fs, 1.0, [(0, -1), (0, -1), (0, 1), (0, 1)])


def test_free_state_normalized(fs8):
    one = FockOperator(np.eye(fs8.dim))
    assert abs(full_state_expectation(fs8, 1.0, 0.0, 0.0, one, W1) - 1.0) < 1e-13


@pytest.mark.parametrize("w", [W1, WP])
def test_duhamel_matches_expansion(fs8, w):
    cfg = ExpansionConfig(B1, 1.0, w)
    one = FockOperator(np.eye(fs8.dim))
    for t in [(0.5,), (0.8, 0.3)]:
        ref = 2 ** len(t) * duhamel_time_product(fs8, 1.0, len(t), t, one, w)
        assert abs(f_value(cfg, len(t), Observable.scalar(), t) - ref) < 1e-7 * max(1, abs(ref))


def test_exact_coefficients_match_derivatives(fs8):
    one = FockOperator(np.eye(fs8.dim))
    a = exact_coefficients(fs8, 1.0, 0.0, 3, one, W1)
    h = 1e-3
    A = [full_state_expectation(fs8, 1.0, 0.0, z, one, W1) for z in (0.0, h, 2 * h)]
    assert abs(a[0] - A[0]) < 1e-13
    # forward differences, O(h) error
    assert abs((A[1] - A[0]) / h - a[1]) < 1e-3 * abs(a[2]) * 10 + 1e-9
    cfg = ExpansionConfig(B1, 1.0, W1)
    for m in (1, 2):
        assert abs(coefficient(cfg, m, Observable.scalar(), order=24) - a[m]) < 1e-9 * abs(a[m]) + 1e-12


def test_number_operator_expectation(fs8):
    val = full_state_expectation(fs8, 1.0, 0.0, 0.0, number_operator(fs8, 1.0), W1)
    assert abs(val - sum(bose_green(B1.eigenvalues, 1.0))) < 1e-6


def test_exact_correlation_hermitian(fs8):
    ker = exact_correlation(fs8, 1.0, 0.0, 0.5, 1, W1)
    assert ker.hermitian_deviation < 1e-12
    assert np.all(np.linalg.eigvalsh(ker.matrix) > 0)


def test_mode_observable_ordering(fs8):
    op = mode_observable(fs8, 2.0, (0,), (1,)).matrix
    ref = ladder(fs8, 0, "create", 2.0).matrix @ ladder(fs8, 1, "annihilate", 2.0).matrix
    np.testing.assert_allclose(op, ref, atol=1e-15)
