"""Plane-wave spectral data of h = -Laplacian + kappa on the unit torus.

Everything here is diagonal in the mode basis u_n(x) = exp(2 pi i n.x), so
operators are stored as one real number per mode.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import DomainError, ParameterError

FOUR_PI2 = 4.0 * np.pi**2


@dataclass(frozen=True)
class TorusBasis:
    """Modes n in Z^d with |n|_inf <= K, lexicographic order.

    The explicit mode list is built on first use; ``spectrum()`` gives the
    eigenvalues with multiplicities without ever enumerating modes, which is
    what the large-K particle-number sums use.
    """

    d: int
    K: int
    kappa: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ParameterError(f"d must be 1, 2 or 3, got {self.d}")
        if self.K < 0:
            raise ParameterError("K must be nonnegative")
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")

    @cached_property
    def modes(self) -> np.ndarray:
        rng = range(-self.K, self.K + 1)
        return np.array(list(itertools.product(rng, repeat=self.d)), dtype=int).reshape(-1, self.d)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return FOUR_PI2 * np.sum(self.modes.astype(float) ** 2, axis=1) + self.kappa

    @cached_property
    def _index(self) -> dict:
        return {tuple(int(v) for v in n): i for i, n in enumerate(self.modes)}

    def __len__(self) -> int:
        return (2 * self.K + 1) ** self.d

    def index(self, n) -> int:
        """Position of integer mode vector ``n`` (KeyError if outside)."""
        if np.ndim(n) == 0:
            n = (int(n),)
        return self._index[tuple(int(v) for v in n)]

    def contains(self, n) -> bool:
        return all(abs(int(v)) <= self.K for v in np.atleast_1d(n)) and len(np.atleast_1d(n)) == self.d

    def min_grid(self) -> int:
        return 2 * (2 * self.K + 1)

    @lru_cache(maxsize=None)
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct eigenvalues and their multiplicities."""
        K = self.K
        if self.d == 1:
            k = np.arange(K + 1, dtype=float)
            return FOUR_PI2 * k * k + self.kappa, np.where(k == 0, 1.0, 2.0)
        r = np.zeros(K * K + 1)
        k = np.arange(-K, K + 1)
        np.add.at(r, k * k, 1.0)
        m = r.copy()
        for _ in range(self.d - 1):
            m = np.rint(fftconvolve(m, r))
        s = np.nonzero(m)[0]
        return FOUR_PI2 * s + self.kappa, m[s]


def build_basis(d: int, K: int, kappa: float) -> TorusBasis:
    return TorusBasis(int(d), int(K), float(kappa))


@dataclass(frozen=True)
class DiagonalOperator:
    basis: TorusBasis
    values: np.ndarray
    tag: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.basis),):
            raise ParameterError("one value per mode expected")
        if not np.all(np.isfinite(v)):
            raise ParameterError(f"non-finite values in {self.tag or 'operator'}")
        object.__setattr__(self, "values", v)

    def __mul__(self, other: "DiagonalOperator") -> "DiagonalOperator":
        return DiagonalOperator(self.basis, self.values * other.values, f"{self.tag}*{other.tag}")

    def __sub__(self, other: "DiagonalOperator") -> "DiagonalOperator":
        return DiagonalOperator(self.basis, self.values - other.values, f"{self.tag}-{other.tag}")


def bose_green(lam, tau: float, t: float = 0.0):
    """exp(-t lam/tau) / (tau (exp(lam/tau) - 1)), vectorized in lam."""
    x = np.asarray(lam, dtype=float) / tau
    with np.errstate(over="ignore"):
        return np.exp(-t * x) / (tau * np.expm1(x))


def green_quantum(basis: TorusBasis, tau: float, t: float = 0.0) -> DiagonalOperator:
    if not tau > 0:
        raise ParameterError("tau must be positive")
    if t <= -1.0:
        raise DomainError(f"G_(tau,t) needs t > -1, got {t}")
    return DiagonalOperator(basis, bose_green(basis.eigenvalues, tau, t), f"G[tau={tau},t={t}]")


def green_classical(basis: TorusBasis) -> DiagonalOperator:
    return DiagonalOperator(basis, 1.0 / basis.eigenvalues, "G")


def semigroup(basis: TorusBasis, tau: float, t: float) -> DiagonalOperator:
    if not tau > 0:
        raise ParameterError("tau must be positive")
    if t < 0:
        raise DomainError(f"S_(tau,t) needs t >= 0, got {t}")
    return DiagonalOperator(basis, np.exp(-t * basis.eigenvalues / tau), f"S[tau={tau},t={t}]")


def identity(basis: TorusBasis) -> DiagonalOperator:
    return DiagonalOperator(basis, np.ones(len(basis)), "I")


# --- grids -----------------------------------------------------------------


def grid_points(d: int, N: int) -> np.ndarray:
    """Uniform grid on [0,1)^d, shape (N**d, d), C order."""
    g = np.arange(N) / N
    mesh = np.meshgrid(*([g] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def plane_waves(basis: TorusBasis, N: int) -> np.ndarray:
    """U[x, k] = u_k(x) on the grid."""
    x = grid_points(basis.d, N)
    return np.exp(2j * np.pi * (x @ basis.modes.T))


@dataclass(frozen=True)
class KernelGrid:
    basis: TorusBasis
    N: int
    values: np.ndarray

    @property
    def cell(self) -> float:
        return 1.0 / self.N**self.basis.d


def symbol_kernel(basis: TorusBasis, values: np.ndarray, N: int) -> np.ndarray:
    """A(x;y) = sum_n v_n exp(2 pi i n.(x-y)), real part, on the N^d grid.

    Uses v_n = v_{-n} (true for every radial symbol here), so the kernel is a
    real cosine sum and depends only on x - y.
    """
    x = grid_points(basis.d, N)
    phase = 2.0 * np.pi * (x @ basis.modes.T)
    c, s = np.cos(phase), np.sin(phase)
    v = np.asarray(values, dtype=float)
    return (c * v) @ c.T + (s * v) @ s.T


def kernel(op: DiagonalOperator, N: int) -> KernelGrid:
    basis = op.basis
    if N < basis.min_grid():
        raise ParameterError(f"grid N={N} aliases; need N >= {basis.min_grid()}")
    return KernelGrid(basis, N, symbol_kernel(basis, op.values, N))


def hs_norm(op: DiagonalOperator) -> float:
    return float(np.sqrt(np.sum(op.values**2)))


def trace(op: DiagonalOperator) -> float:
    return float(np.sum(op.values))


def particle_number(basis: TorusBasis, tau: float) -> float:
    """Mean rescaled particle number sum_n g_n, via the multiplicity table."""
    if not tau > 0:
        raise ParameterError("tau must be positive")
    lam, mult = basis.spectrum()
    return float(np.sum(mult * bose_green(lam, tau)))


def trace_inverse(basis: TorusBasis) -> float:
    lam, mult = basis.spectrum()
    return float(np.sum(mult / lam))


# --- convergence diagnostics ------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    tau: float
    green_gap_hs: float
    scaled_trace: float
    sup_time_gap: float
    sup_semigroup: float


def convergence_report(
    basis: TorusBasis,
    taus: Sequence[float],
    n_t: int = 41,
) -> list[ConvergenceRow]:
    """Four diagnostics per tau; t-grids avoid the endpoints of (-1, 1) and (0, 1)."""
    if len(taus) == 0:
        raise ParameterError("empty tau list")
    G = green_classical(basis)
    t_sym = np.linspace(-1.0, 1.0, n_t + 2)[1:-1]
    t_pos = np.linspace(0.0, 1.0, n_t + 2)[1:-1]
    rows = []
    for tau in taus:
        gap = hs_norm(green_quantum(basis, tau) - G)
        tr_scaled = trace(green_quantum(basis, tau)) / tau
        sup_g = max((1.0 + t) * hs_norm(green_quantum(basis, tau, t) - G) for t in t_sym)
        sup_s = max((t / tau) * hs_norm(semigroup(basis, tau, t)) for t in t_pos)
        rows.append(ConvergenceRow(float(tau), gap, tr_scaled, sup_g, sup_s))
    return rows


def fit_loglog(x: Iterable[float], y: Iterable[float]) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of log y against log x."""
    lx, ly = np.log(np.asarray(list(x), float)), np.log(np.asarray(list(y), float))
    return _linfit(lx, ly)


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def fit_linear(x, y) -> tuple[float, float, float]:
    return _linfit(np.asarray(x, float), np.asarray(y, float))
