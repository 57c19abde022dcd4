"""Borel-Laplace resummation of factorially growing coefficient sequences.

The Borel transform B(t) = sum a_m t^m / m! of a truncated series is known only
through its first M Taylor coefficients, and usually has a finite radius of
convergence. To reach the positive half-line we build a chain of anchors
t_0 = 0 < t_1 < ... < t_J = T with a local Taylor expansion at each anchor.

Two generators for the local data:

* ``taylor`` re-expands the truncated polynomial itself. Exact for entire B
  given enough terms, meaningless past the radius.
* ``pade`` re-expands a Pade approximant of the truncated Borel series. This
  is what gets past the singularity on the negative axis for the quartic toy.

The per-step residual compares anchor j's truncated local series, evaluated
at t_{j+1}, with the value generated at t_{j+1}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import pade
from scipy.special import comb

from .errors import ConvergenceError, DomainError, InvariantViolation, ParameterError
from .expansion import CoefficientSeries, fit_growth

Method = Literal["auto", "pade", "taylor"]

DEFAULT_R = 2.0
DEFAULT_C0 = 1.0


@dataclass(frozen=True)
class BorelSeries:
    a: np.ndarray  # a_m
    b: np.ndarray  # a_m / m!
    nu: float
    sigma: float

    @property
    def radius(self) -> float:
        return math.inf if self.sigma == 0 else 1.0 / self.sigma

    def __len__(self) -> int:
        return len(self.a)

    def __call__(self, t):
        """Truncated B(t)."""
        return np.polynomial.polynomial.polyval(t, self.b)


def borel_transform(series: CoefficientSeries | Sequence[float]) -> BorelSeries:
    if not isinstance(series, CoefficientSeries):
        series = CoefficientSeries.from_values(list(series))
    a = np.asarray(series.values, dtype=complex)
    if np.all(a.imag == 0):
        a = a.real
    if len(a) < 2:
        raise ParameterError("need at least two coefficients")
    nu, sigma = series.nu, series.sigma
    fac = np.array([math.factorial(m) for m in range(len(a))], dtype=float)
    env = nu * sigma ** np.arange(len(a)) * fac
    if np.any(np.abs(a) > env * (1 + 1e-9) + 1e-300):
        raise InvariantViolation("coefficients exceed the stored growth envelope")
    return BorelSeries(a, a / fac, nu, sigma)


# --- local series algebra ----------------------------------------------------------


def _shift_poly(c: np.ndarray, h: float) -> np.ndarray:
    """Coefficients of p(h + s) in s."""
    n = len(c)
    out = np.zeros(n, dtype=c.dtype)
    for k in range(n):
        j = np.arange(k, n)
        out[k] = np.sum(c[j] * comb(j, k) * h ** (j - k))
    return out


def _series_div(p: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
    """First n Taylor coefficients of p/q (q[0] != 0)."""
    p = np.concatenate([p, np.zeros(max(0, n - len(p)))])[:n]
    q = np.concatenate([q, np.zeros(max(0, n - len(q)))])[:n]
    out = np.zeros(n, dtype=np.result_type(p, q))
    for k in range(n):
        out[k] = (p[k] - np.dot(out[:k], q[k:0:-1])) / q[0]
    return out


@dataclass(frozen=True)
class ContinuationGrid:
    anchors: np.ndarray  # t_0..t_J
    local: np.ndarray  # (J+1, n_terms) Taylor coefficients at each anchor
    step: float
    residuals: np.ndarray  # residual of step j -> j+1, length J
    method: str
    source: BorelSeries

    @property
    def T(self) -> float:
        return float(self.anchors[-1])

    def evaluate(self, t) -> np.ndarray:
        """B(t) for 0 <= t <= T from the local series of the anchor at or below t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.T * (1 + 1e-12)):
            raise DomainError("t outside the continuation range")
        j = np.minimum(np.searchsorted(self.anchors, t, side="right") - 1, len(self.anchors) - 1)
        s = t - self.anchors[j]
        n = self.local.shape[1]
        powers = s[:, None] ** np.arange(n)[None, :]
        return np.sum(self.local[j] * powers, axis=1)


def _pade_candidate(b: np.ndarray, T: float, h: float):
    """Numerator/denominator of the highest usable Pade approximant, or None.

    A candidate is usable when every pole keeps a distance of at least 2h from
    [0, T] and the denominator is well scaled at the origin.
    """
    M = len(b)
    for nq in range(M // 2, 0, -1):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                P, Q = pade(b, nq, M - 1 - nq)
        except (np.linalg.LinAlgError, ValueError):
            continue
        qc = Q.coeffs[::-1]
        if abs(qc[0]) < 1e-12 * np.max(np.abs(qc)):
            continue
        poles = Q.roots
        if len(poles):
            x = np.clip(poles.real, 0.0, T)
            dist = np.abs(poles - x)
            if np.min(dist) < 2 * h:
                continue
        return P.coeffs[::-1] / qc[0], qc / qc[0]
    return None


def continue_series(
    bs: BorelSeries,
    T: float,
    step_factor: float = 0.2,
    method: Method = "auto",
    n_terms: Optional[int] = None,
    h_max: float = 0.25,
    tol: float = 1e-6,
) -> ContinuationGrid:
    """Anchor chain out to T with step min(step_factor/sigma, h_max)."""
    if not T > 0:
        raise ParameterError("T must be positive")
    if not 0 < step_factor <= 0.25:
        raise ParameterError("step factor must lie in (0, 1/4]")
    h = h_max if bs.sigma == 0 else min(step_factor / bs.sigma, h_max)
    J = max(1, int(math.ceil(T / h - 1e-12)))
    h = T / J
    anchors = h * np.arange(J + 1)
    b = np.asarray(bs.b)
    if not np.any(b):
        n = n_terms or len(b)
        return ContinuationGrid(anchors, np.zeros((J + 1, n)), h, np.zeros(J), "zero", bs)

    rat = None
    if method in ("auto", "pade"):
        rat = _pade_candidate(b, T, h)
        if rat is None and method == "pade":
            raise ConvergenceError("no Pade approximant keeps its poles off the integration path")
    used = "pade" if rat is not None else "taylor"
    n = n_terms or (30 if used == "pade" else len(b))

    local = np.zeros((J + 1, n), dtype=b.dtype)
    if used == "taylor":
        base = np.concatenate([b, np.zeros(max(0, n - len(b)))])[: max(n, len(b))]
        for j, t in enumerate(anchors):
            local[j] = _shift_poly(base, t)[:n]
    else:
        P, Q = rat
        for j, t in enumerate(anchors):
            local[j] = _series_div(_shift_poly(P, t), _shift_poly(Q, t), n)

    powers = h ** np.arange(n)
    residuals = np.zeros(J)
    for j in range(J):
        pred = np.dot(local[j], powers)
        ref = local[j + 1][0]
        if used == "taylor":
            # the chain is an exact re-expansion; measure the size of the last
            # retained term instead, a proxy for truncation error
            residuals[j] = abs(local[j][-1]) * h ** (n - 1)
        else:
            residuals[j] = abs(pred - ref)
        scale = max(1.0, abs(ref))
        if residuals[j] > tol * scale:
            raise ConvergenceError(
                f"continuation residual {residuals[j]:.3g} at t={anchors[j + 1]:.4g}; "
                f"max reachable T = {anchors[j]:.4g}"
            )
    return ContinuationGrid(anchors, local, h, residuals, used, bs)


# --- Laplace transform -------------------------------------------------------------------


@dataclass(frozen=True)
class LaplaceResult:
    value: complex
    tail_bound: float
    shift_residual: float
    T: float
    method: str

    def __complex__(self) -> complex:
        return complex(self.value)

    def __float__(self) -> float:
        return float(np.real(self.value))


def _check_z(z: complex, R: float) -> float:
    if z == 0:
        raise DomainError("z = 0 is not in the Laplace domain")
    rate = (1.0 / z).real
    if not rate > 1.0 / R:
        raise DomainError(f"need Re(1/z) > 1/R = {1.0 / R:g}, got {rate:g}")
    return rate


def tail_bound(bs: BorelSeries, z: complex, T: float, R: float = DEFAULT_R, C0: float = DEFAULT_C0) -> float:
    """Bound on |(1/z) int_T^inf e^{-t/z} B(t) dt| assuming
    |B(t)| <= C0 nu max(1, R sigma) e^{t/R}."""
    rate = _check_z(z, R) - 1.0 / R
    return _envelope_const(bs, R, C0) * math.exp(-T * rate) / (abs(z) * rate)


def _envelope_const(bs: BorelSeries, R: float, C0: float) -> float:
    return C0 * bs.nu * max(1.0, R * bs.sigma)


def choose_T(bs: BorelSeries, z: complex, rel_tol: float = 1e-6, R: float = DEFAULT_R, C0: float = DEFAULT_C0,
             T_min: float = 1.0) -> float:
    rate = _check_z(z, R) - 1.0 / R
    scale = max(abs(bs.a[0]), 1e-12)
    pre = _envelope_const(bs, R, C0) / (abs(z) * rate)
    if pre == 0:
        return T_min
    return max(T_min, math.log(pre / (rel_tol * scale)) / rate)


def laplace_sum(grid: ContinuationGrid, z: complex, R: float = DEFAULT_R, C0: float = DEFAULT_C0,
                nodes: int = 8) -> LaplaceResult:
    """(1/z) int_0^T e^{-t/z} B(t) dt by composite Gauss-Legendre over anchor intervals."""
    rate = _check_z(z, R)
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, h = grid.anchors[:-1], grid.step
    t = (a[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
    # evaluate each interval with its own left anchor
    j = np.repeat(np.arange(len(a)), nodes)
    s = t - grid.anchors[j]
    n = grid.local.shape[1]
    B = np.sum(grid.local[j] * s[:, None] ** np.arange(n)[None, :], axis=1)
    val = np.sum(np.tile(0.5 * h * w, len(a)) * np.exp(-t / z) * B) / z
    tail = tail_bound(grid.source, z, grid.T, R, C0)
    budget = float(np.sum(grid.residuals * h * np.exp(-grid.anchors[1:] * rate)) / abs(z))
    if np.isrealobj(grid.local) and np.isreal(z):
        val = float(np.real(val))
    return LaplaceResult(val, tail, budget, grid.T, grid.method)


def resum(
    series: CoefficientSeries | Sequence[float],
    z: complex = 1.0,
    rel_tol: float = 1e-6,
    R: float = DEFAULT_R,
    C0: float = DEFAULT_C0,
    method: Method = "auto",
    T: Optional[float] = None,
    **kw,
) -> LaplaceResult:
    bs = borel_transform(series)
    T = T if T is not None else choose_T(bs, z, rel_tol, R, C0)
    grid = continue_series(bs, T, method=method, **kw)
    return laplace_sum(grid, z, R, C0)


def resum_at(series: CoefficientSeries, z: complex = 1.0, **kw):
    """Plain value; fits the ``Resummer`` signature used by correlation kernels."""
    return resum(series, z, **kw).value


def resummation_distance(A, B, z: complex = 1.0, **kw) -> tuple[float, float]:
    """(|L A - L B|, combined error budget)."""
    ra, rb = resum(A, z, **kw), resum(B, z, **kw)
    budget = ra.tail_bound + rb.tail_bound + ra.shift_residual + rb.shift_residual
    return abs(ra.value - rb.value), budget


# --- quartic toy ------------------------------------------------------------------------


def toy_coefficients(M: int) -> list[Fraction]:
    """(-1)^m (4m-1)!!/m!, exact."""
    out = []
    for m in range(M):
        df = 1
        for k in range(4 * m - 1, 0, -2):
            df *= k
        out.append(Fraction((-1) ** m * df, math.factorial(m)))
    return out


def toy_envelope(M: int, z: float) -> float:
    df = 1
    for k in range(4 * M - 1, 0, -2):
        df *= k
    return df / math.factorial(M) * abs(z) ** M


def toy_oracle(z: float) -> float:
    """(2 pi)^{-1/2} int exp(-z x^4 - x^2/2) dx."""
    if z < 0:
        raise DomainError("toy integral diverges for z < 0")
    f = lambda x: math.exp(-z * x**4 - 0.5 * x * x)  # noqa: E731
    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=200)
    return 2.0 * val / math.sqrt(2.0 * math.pi)
