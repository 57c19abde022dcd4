import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbslab.counterterm import (
    PotentialGrid,
    convolve,
    decay_rate,
    density_diag,
    kernel_scaling_check,
    reference_density,
    refined_residual,
    resample,
    solve_fixed_point,
    squared_green_diag,
    theta,
)
from gibbslab.errors import DomainError, ParameterError
from gibbslab.expansion import Interaction
from gibbslab.linalg import numpy_eigh
from gibbslab.spectral import FOUR_PI2

W = Interaction.fejer(1, 2, 1.0)


def _grid(V=lambda x: 1 + 0.5 * np.cos(2 * np.pi * x[:, 0]), N=15, kappa=10.0, tau=100.0):
    return PotentialGrid.from_function(1, N, V, kappa, tau)


def test_grid_validation():
    with pytest.raises(ParameterError, match="odd"):
        _grid(N=16)
    with pytest.raises(ParameterError):
        _grid(V=lambda x: np.cos(2 * np.pi * x[:, 0]))
    with pytest.raises(ParameterError):
        _grid(V=lambda x: 1e-4 + 0 * x[:, 0])


def test_norm_weighting():
    g = _grid(V=lambda x: 2.0 + 0 * x[:, 0])
    assert g.norm(np.ones(15)) == 0.5
    z = _grid(V=lambda x: 0 * x[:, 0])
    assert z.norm(-3 * np.ones(15)) == 3.0


def test_constant_potential_density_is_flat():
    g = _grid(V=lambda x: 0 * x[:, 0])
    rho = density_diag(g, np.zeros(15))
    np.testing.assert_allclose(rho, reference_density(g), rtol=1e-11)


def test_eigensolvers_agree():
    g = _grid()
    np.testing.assert_allclose(density_diag(g, g.values), density_diag(g, g.values, numpy_eigh), rtol=1e-10)


def test_density_domain():
    g = _grid()
    with pytest.raises(DomainError):
        density_diag(g, -20 * np.ones(15))


def test_convolution_with_single_mode():
    g = _grid(N=9)
    w = Interaction(1, (((0,), 2.0), ((1,), 0.5), ((-1,), 0.5)))
    f = np.cos(2 * np.pi * g.points[:, 0])
    np.testing.assert_allclose(convolve(g, w, f), 0.5 * f, atol=1e-13)
    np.testing.assert_allclose(convolve(g, w, np.ones(9)), 2.0, atol=1e-13)


@given(st.integers(0, 3), st.sampled_from([9, 11, 21]))
def test_resample_band_limited(k, N2):
    N = 9
    x = np.arange(N) / N
    x2 = np.arange(N2) / N2
    got = resample(np.cos(2 * np.pi * k * x), 1, N, N2)
    np.testing.assert_allclose(got, np.cos(2 * np.pi * k * x2), atol=1e-12)


def test_zero_potential_is_a_fixed_point():
    rep = solve_fixed_point(_grid(V=lambda x: 0 * x[:, 0]), W)
    assert rep.converged and rep.residuals[-1] <= 1e-12


def test_smooth_potential_converges():
    g = _grid(N=31)
    rep = solve_fixed_point(g, W)
    assert rep.converged and rep.iterations <= 30
    assert all(r < 1 for r in rep.ratios)
    # the finer grid sees discretization error only
    assert refined_residual(g, W, rep.v, 45) < 1e-5


@given(st.floats(0.01, 0.5), st.floats(0.0, 0.5))
def test_theta_matches_direct_sum(s, x):
    k = np.arange(-200, 201)
    ref = np.sum(np.exp(-FOUR_PI2 * k**2 * s) * np.cos(2 * np.pi * k * x))
    assert abs(theta(np.array([s]), x)[0] - ref) < 1e-12 * max(1.0, ref)


def test_squared_green_against_mode_sum():
    kappa, tau, alpha = 5.0, 50.0, 0.5
    k = np.arange(-12, 13)
    lam = FOUR_PI2 * k**2 + kappa
    direct = np.sum(np.exp(alpha * lam / tau) / np.expm1(lam / tau) ** 2) / tau**2
    assert abs(squared_green_diag(1, kappa, tau, alpha) - direct) < 1e-10 * direct


def test_scaling_slope_in_two_dimensions():
    fit = kernel_scaling_check(2, [100, 200, 400, 800, 1600])
    assert abs(fit.slope - fit.expected) < 0.15


def test_decay_grows_like_sqrt_kappa():
    lo, hi = decay_rate(1, 25.0), decay_rate(1, 100.0)
    assert hi.rate > lo.rate
    assert 0.5 < hi.rate_over_sqrt_kappa < 1.2
