import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbslab.classicalmc import (
    cauchy_check,
    classical_gamma,
    density_modes,
    expected_wick_interaction,
    interaction_value,
    observable_values,
    reweighted_expectation,
    sample_ensemble,
    sample_field,
    standard_complex_gaussian,
    zero_field_wick_value,
)
from gibbslab.errors import ConvergenceError, ParameterError
from gibbslab.expansion import ExpansionConfig, Interaction, Observable, coefficient
from gibbslab.spectral import build_basis

B = build_basis(1, 2, 4.0)
W = Interaction.fejer(1, 2, 0.5)


def test_complex_gaussian_variances():
    z = standard_complex_gaussian(np.random.default_rng(1), 200_000)
    assert abs(z.real.var() - 0.5) < 0.01 and abs(z.imag.var() - 0.5) < 0.01
    assert abs(np.mean(np.abs(z) ** 2) - 1) < 0.01


def test_seeded_streams_reproduce():
    a = sample_ensemble(B, 5000, 7).omega
    b = sample_ensemble(B, 5000, 7).omega
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_ensemble(B, 5000, 8).omega)


def test_restrict_keeps_omega():
    s = sample_field(build_basis(1, 3, 1.0), 0, 4)
    small = s.restrict(build_basis(1, 1, 1.0))
    np.testing.assert_array_equal(small.omega, s.omega[:, 2:5])
    with pytest.raises(ParameterError):
        small.restrict(build_basis(1, 3, 1.0))


@given(st.integers(1, 5), st.integers(1, 2), st.integers(0, 10**6))
def test_density_zero_mode_is_parseval(K, d, seed):
    s = sample_field(build_basis(d, K, 1.0), seed, 3)
    qs, h = density_modes(s, 1)
    zero = int(np.nonzero(~np.any(qs, axis=1))[0][0])
    np.testing.assert_allclose(h[:, zero].real, np.sum(np.abs(s.amplitudes) ** 2, axis=1), rtol=1e-12)


def test_local_equals_flat_plain_interaction():
    # w_hat = alpha on the whole box turns the plain form into alpha/2 int |phi|^4
    K, alpha = 2, 0.7
    s = sample_field(build_basis(1, K, 1.0), 3, 5)
    table = tuple(((q,), alpha) for q in range(-2 * K, 2 * K + 1))
    flat = Interaction(1, table, "positive")
    np.testing.assert_allclose(interaction_value(s, flat, "plain"), interaction_value(s, None, "local", alpha), rtol=1e-12)


def test_wick_mean_matches_pair_sum():
    s = sample_ensemble(B, 40_000, 11)
    vals = interaction_value(s, W, "wick")
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - expected_wick_interaction(B, W)) < 4 * se
    assert np.all(vals >= 0)


def test_wick_mean_is_minus_first_coefficient():
    cfg = ExpansionConfig(B, math.inf, W)
    assert abs(expected_wick_interaction(B, W) + coefficient(cfg, 1, Observable.scalar())) < 1e-13


def test_zero_field_value():
    rho = np.sum(1 / B.eigenvalues)
    assert zero_field_wick_value(B, W) == pytest.approx(0.5 * W.coeff((0,)) * rho**2)


def test_free_two_point():
    s = sample_ensemble(B, 20_000, 5)
    for k in range(len(B)):
        est = reweighted_expectation(W, Observable.mode_projector((k,), (k,)), s, z=0.0)
        assert est.within(1 / B.eigenvalues[k])


def test_observable_identity_kind():
    s = sample_field(B, 2, 4)
    np.testing.assert_allclose(observable_values(s, Observable.identity(1)).real, np.sum(np.abs(s.amplitudes) ** 2, axis=1))


def test_low_ess_raises():
    s = sample_ensemble(B, 2000, 1)
    with pytest.raises(ConvergenceError):
        reweighted_expectation(W, Observable.scalar(), s, z=1e6)


def test_too_few_samples():
    with pytest.raises(ParameterError):
        reweighted_expectation(W, Observable.scalar(), sample_ensemble(B, 100, 1))


def test_cauchy_differences_shrink():
    bases = [build_basis(1, K, 4.0) for K in (2, 4, 8)]
    est = cauchy_check(bases, W, 5000, 3)
    assert est[0].mean > est[1].mean > 0


def test_gamma_has_errors_and_is_hermitian():
    g = classical_gamma(W, 1, sample_ensemble(B, 4000, 9))
    assert g.stderr.shape == g.matrix.shape
    np.testing.assert_allclose(g.matrix, g.matrix.conj().T)
