import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from gibbslab.borel import (
    borel_transform,
    choose_T,
    continue_series,
    resum,
    resummation_distance,
    tail_bound,
    toy_coefficients,
    toy_envelope,
    toy_oracle,
)
from gibbslab.errors import ConvergenceError, DomainError, InvariantViolation, ParameterError
from gibbslab.expansion import CoefficientSeries

# mpmath quadrature at 30 digits, frozen
TOY_AT_0_1 = 0.8576085853444116


def _bessel_toy(z):
    a = 1 / (32 * z)
    return math.exp(a) * special.kv(0.25, a) / (4 * math.sqrt(math.pi * z))


def test_toy_coefficients_are_gaussian_moments():
    c = toy_coefficients(6)
    assert c[0] == 1 and c[1] == Fraction(-3)
    for m in range(6):
        assert abs(float(c[m]) - (-1) ** m * stats.norm.moment(4 * m) / math.factorial(m)) < 1e-9 * abs(float(c[m]))


@pytest.mark.parametrize("z", [0.02, 0.1, 1.0])
def test_toy_oracle_matches_bessel_form(z):
    assert abs(toy_oracle(z) - _bessel_toy(z)) < 1e-12


def test_toy_frozen_value():
    assert abs(toy_oracle(0.1) - TOY_AT_0_1) < 1e-12
    assert toy_oracle(0.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        toy_oracle(-0.1)


@pytest.mark.parametrize("z", [0.02, 0.05])
def test_toy_remainder_under_envelope(z):
    c = toy_coefficients(9)
    exact = toy_oracle(z)
    for M in range(1, 9):
        part = float(sum(c[m] * Fraction(z) ** m for m in range(M)))
        assert abs(exact - part) <= toy_envelope(M, z)


def test_borel_transform_divides_factorials():
    bs = borel_transform([1.0, 2.0, 6.0, 24.0])
    np.testing.assert_allclose(bs.b, [1, 2, 3, 4])
    assert bs.sigma > 0 and bs.radius == 1 / bs.sigma


def test_borel_transform_guards():
    with pytest.raises(ParameterError):
        borel_transform([1.0])
    bad = CoefficientSeries((1.0, 5.0), nu=1.0, sigma=1.0)
    with pytest.raises(InvariantViolation):
        borel_transform(bad)


@pytest.mark.parametrize("method", ["taylor", "pade"])
def test_continuation_of_exponential(method):
    vals = [1.0] * 30
    grid = continue_series(borel_transform(vals), 3.0, method=method)
    t = np.linspace(0, 3, 13)
    np.testing.assert_allclose(grid.evaluate(t), np.exp(t), rtol=1e-10)


@given(st.floats(0.05, 1.0), st.floats(0.05, 0.4))
def test_geometric_series_resums_to_pole(c, z):
    # a_m = m! c^m has Borel sum (1/z) int e^{-t/z}/(1 - ct) only for c < 0; use alternating sign
    vals = [math.factorial(m) * (-c) ** m for m in range(10)]
    ref, _ = integrate.quad(lambda t: math.exp(-t / z) / (1 + c * t), 0, np.inf, epsabs=1e-13)
    got = resum(vals, z)
    assert abs(got.value - ref / z) < 1e-6


@given(st.floats(-0.9, 0.9), st.floats(0.05, 0.4))
def test_convergent_series(c, z):
    vals = [c**m for m in range(14)]
    assert abs(resum(vals, z).value - 1 / (1 - c * z)) < 1e-6


def test_zero_and_trivial_series():
    assert resum([0.0, 0.0, 0.0], 0.5).value == 0.0
    assert resum([1.0, 0.0, 0.0, 0.0], 0.5).value == pytest.approx(1.0, abs=1e-6)


def test_domain_check():
    with pytest.raises(DomainError):
        resum([1.0, -1.0, 2.0], 2.0)
    with pytest.raises(DomainError):
        tail_bound(borel_transform([1.0, 1.0]), 0, 1.0)


def test_tail_shrinks_with_T():
    bs = borel_transform([1.0, -1.0, 2.0])
    T = choose_T(bs, 0.5)
    assert tail_bound(bs, 0.5, T) <= 1e-6 * 1.0 * (1 + 1e-9)
    assert tail_bound(bs, 0.5, 2 * T) < tail_bound(bs, 0.5, T)


def test_toy_resummation_near_exact():
    vals = [float(c) for c in toy_coefficients(12)]
    assert abs(resum(vals, 0.1).value - TOY_AT_0_1) < 1e-3


def test_distance_of_identical_series():
    s = [1.0, -0.3, 0.2]
    dist, budget = resummation_distance(s, s, 0.5)
    assert dist == 0.0 and budget >= 0


def test_taylor_reports_reach():
    with pytest.raises(ConvergenceError, match="max reachable T"):
        continue_series(borel_transform([1.0, -1.0, 1.0, -1.0]), 5.0, method="taylor")
