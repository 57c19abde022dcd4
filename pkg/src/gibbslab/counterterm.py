"""Counterterm fixed point u = V + w * (rho^{kappa+u} - rho_bar) on a periodic grid.

rho^{kappa+u}(x) is the diagonal of f(h_u), f(x) = 1/(tau (e^{x/tau} - 1)),
h_u = -Laplacian + kappa + u, with the Laplacian acting through the exact
torus eigenvalues on the grid's own Fourier modes. Grid functions carry cell
weight 1/N^d, so a kernel value is N^d times the matrix entry.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, ParameterError
from .expansion import Interaction
from .linalg import EigDecomposition, jacobi_eigh, sym_matrix_function
from .spectral import FOUR_PI2, fit_linear, fit_loglog, grid_points

V_MIN = 1e-3


@dataclass(frozen=True)
class PotentialGrid:
    d: int
    N: int
    values: np.ndarray  # V on the grid, flattened C order
    kappa: float
    tau: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.shape != (self.N**self.d,):
            raise ParameterError("need one value per grid point")
        if not self.kappa > 0 or not self.tau > 0:
            raise ParameterError("kappa and tau must be positive")
        if self.N % 2 == 0:
            raise ParameterError("use an odd grid so every Fourier mode has a partner")
        if np.any(v < 0):
            raise ParameterError("V must be nonnegative")
        if np.any(v) and np.min(v) < V_MIN:
            raise ParameterError(f"V must stay above {V_MIN} for the weighted norm")
        object.__setattr__(self, "values", v)

    @staticmethod
    def from_function(d: int, N: int, V: Callable[[np.ndarray], np.ndarray], kappa: float, tau: float) -> "PotentialGrid":
        return PotentialGrid(d, N, V(grid_points(d, N)), kappa, tau)

    @property
    def points(self) -> np.ndarray:
        return grid_points(self.d, self.N)

    @property
    def freqs(self) -> np.ndarray:
        """Integer frequency of every DFT index, shape (N^d, d)."""
        f = np.rint(np.fft.fftfreq(self.N) * self.N).astype(int)
        mesh = np.meshgrid(*([f] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def with_tau(self, tau: float) -> "PotentialGrid":
        return PotentialGrid(self.d, self.N, self.values, self.kappa, tau)

    def with_kappa(self, kappa: float) -> "PotentialGrid":
        return PotentialGrid(self.d, self.N, self.values, kappa, self.tau)

    def norm(self, f: np.ndarray) -> float:
        """sup |f/V|; plain sup norm when V vanishes identically."""
        f = np.asarray(f, float).ravel()
        if not np.any(self.values):
            return float(np.max(np.abs(f)))
        return float(np.max(np.abs(f) / self.values))


def _laplacian(grid: PotentialGrid) -> np.ndarray:
    n = grid.N**grid.d
    sym = FOUR_PI2 * np.sum(grid.freqs.astype(float) ** 2, axis=1)
    shape = (grid.N,) * grid.d
    # L = F^dag diag(sym) F applied to each unit vector
    eye = np.eye(n).reshape((n,) + shape)
    axes = tuple(range(1, grid.d + 1))
    out = np.fft.ifftn(np.fft.fftn(eye, axes=axes) * sym.reshape(shape), axes=axes)
    L = out.reshape(n, n).real
    return 0.5 * (L + L.T)


def _bose(tau: float):
    def f(x):
        if np.any(x <= 0):
            raise DomainError(f"h_u has nonpositive eigenvalue {np.min(x)!r}")
        with np.errstate(over="ignore"):
            return 1.0 / (tau * np.expm1(x / tau))

    return f


def density_diag(
    grid: PotentialGrid,
    u: np.ndarray,
    eig: Callable[[np.ndarray], EigDecomposition] = jacobi_eigh,
) -> np.ndarray:
    u = np.asarray(u, float).ravel()
    if np.any(grid.kappa + u <= 0):
        raise DomainError("kappa + u must be positive on the grid")
    h = _laplacian(grid) + np.diag(grid.kappa + u)
    F = sym_matrix_function(h, _bose(grid.tau), eig=eig)
    return np.diag(F) * grid.N**grid.d


def reference_density(grid: PotentialGrid) -> float:
    """rho_bar: the u = 0 diagonal, computed from the grid spectrum directly."""
    lam = FOUR_PI2 * np.sum(grid.freqs.astype(float) ** 2, axis=1) + grid.kappa
    return float(np.sum(_bose(grid.tau)(lam)))


def convolve(grid: PotentialGrid, interaction: Interaction, g: np.ndarray) -> np.ndarray:
    """(w * g)(x) = sum_q w_hat(q) g_hat(q) e^{2 pi i q x}, exact on the grid."""
    if interaction.degree > (grid.N - 1) // 2:
        raise ParameterError("w has modes the grid cannot represent")
    shape = (grid.N,) * grid.d
    gh = np.fft.fftn(np.asarray(g, float).reshape(shape))
    wq = np.array([interaction.coeff(q) for q in grid.freqs]).reshape(shape)
    return np.fft.ifftn(gh * wq).real.ravel()


def phi_map(grid: PotentialGrid, u: np.ndarray, interaction: Interaction, eig=jacobi_eigh) -> np.ndarray:
    rho = density_diag(grid, u, eig)
    return grid.values + convolve(grid, interaction, rho - reference_density(grid))


def lipschitz_ratio(grid: PotentialGrid, interaction: Interaction, u1, u2, eig=jacobi_eigh) -> float:
    num = grid.norm(phi_map(grid, u1, interaction, eig) - phi_map(grid, u2, interaction, eig))
    den = grid.norm(np.asarray(u1) - np.asarray(u2))
    if den == 0:
        raise ParameterError("u1 and u2 coincide")
    return num / den


@dataclass
class FixedPointReport:
    residuals: list = field(default_factory=list)  # ||Phi(u) - u||_V per iteration
    ratios: list = field(default_factory=list)
    v: Optional[np.ndarray] = None
    converged: bool = False
    reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.residuals)


def solve_fixed_point(
    grid: PotentialGrid,
    interaction: Interaction,
    r: float = 0.5,
    max_iter: int = 30,
    tol: float = 1e-10,
    kappa_min: float = 1.0,
    eig=jacobi_eigh,
) -> FixedPointReport:
    """Banach iteration from u = V inside the ball ||u - V||_V <= r."""
    if not 0 < r < 1:
        raise ParameterError("r must lie in (0, 1)")
    if grid.kappa < kappa_min:
        warnings.warn(f"kappa = {grid.kappa} below the configured threshold {kappa_min}", RuntimeWarning)
    rep = FixedPointReport()
    u = grid.values.copy()
    for _ in range(max_iter):
        nxt = phi_map(grid, u, interaction, eig)
        res = grid.norm(nxt - u)
        if rep.residuals and rep.residuals[-1] > 0:
            rep.ratios.append(res / rep.residuals[-1])
        rep.residuals.append(res)
        if res <= tol:
            rep.v, rep.converged = u, True
            return rep
        u = nxt
        if grid.norm(u - grid.values) > r:
            rep.v, rep.reason = u, f"left the ball: ||u - V||_V = {grid.norm(u - grid.values):.3g} > r = {r}"
            return rep
    rep.v = u
    rep.reason = f"no convergence in {max_iter} iterations (last residual {rep.residuals[-1]:.3g})"
    return rep


def resample(values: np.ndarray, d: int, N: int, N2: int) -> np.ndarray:
    """Band-limited interpolation of a grid function onto a finer odd grid."""
    if N2 < N or N2 % 2 == 0:
        raise ParameterError("target grid must be odd and at least as fine")
    shape = (N,) * d
    vh = np.fft.fftshift(np.fft.fftn(np.asarray(values, float).reshape(shape)))
    pad = (N2 - N) // 2
    big = np.pad(vh, [(pad, pad)] * d)
    out = np.fft.ifftn(np.fft.ifftshift(big)).real * (N2 / N) ** d
    return out.ravel()


def refined_residual(grid: PotentialGrid, interaction: Interaction, v: np.ndarray, N2: int, eig=jacobi_eigh) -> float:
    """||Phi(v) - v||_V after interpolating V and v onto an N2 grid."""
    fine = PotentialGrid(grid.d, N2, resample(grid.values, grid.d, grid.N, N2), grid.kappa, grid.tau)
    vf = resample(v, grid.d, grid.N, N2)
    return fine.norm(phi_map(fine, vf, interaction, eig) - vf)


# --- kernel scaling in kappa ----------------------------------------------------------------


def theta(s: np.ndarray, x: float = 0.0) -> np.ndarray:
    """sum_k exp(-4 pi^2 k^2 s) cos(2 pi k x), via Poisson summation for small s."""
    s = np.asarray(s, float)
    out = np.empty_like(s)
    small = s < 0.1
    if np.any(small):
        ss = s[small]
        m = np.arange(-6, 7)[:, None]
        out[small] = np.sum(np.exp(-((x - m) ** 2) / (4 * ss[None, :])), axis=0) / np.sqrt(4 * np.pi * ss)
    if np.any(~small):
        ss = s[~small]
        k = np.arange(1, 30)[:, None]
        out[~small] = 1.0 + 2.0 * np.sum(np.exp(-FOUR_PI2 * k**2 * ss[None, :]) * np.cos(2 * np.pi * k * x), axis=0)
    return out


def _geometric_sum(terms: Callable[[np.ndarray], np.ndarray], rate: float, chunk: int = 1 << 20) -> float:
    """sum_{j>=1} terms(j) where terms decay at least like e^{-rate j}."""
    J = int(math.ceil(45.0 / rate)) + 1
    total = 0.0
    for start in range(1, J + 1, chunk):
        j = np.arange(start, min(J, start + chunk - 1) + 1, dtype=float)
        total += float(np.sum(terms(j)))
    return total


def squared_green_diag(d: int, kappa: float, tau: float, alpha: float) -> float:
    """[(1/tau^2) e^{alpha h/tau} / (e^{h/tau} - 1)^2](x;x) on the unit torus.

    Uses e^{a y}/(e^y - 1)^2 = sum_{j>=1} j e^{-(j+1-a) y} and the heat trace.
    """
    if not 0 <= alpha < 2:
        raise ParameterError("alpha must lie in [0, 2)")
    f = lambda j: j * np.exp(-(j + 1 - alpha) * kappa / tau) * theta((j + 1 - alpha) / tau) ** d  # noqa: E731
    return _geometric_sum(f, kappa / tau) / tau**2


def green_offdiag(d: int, kappa: float, tau: float, alpha: float, r: float) -> float:
    """[(1/tau) e^{alpha h/tau}/(e^{h/tau} - 1)](x;y) with x - y = (r, 0, ..., 0)."""
    if not 0 <= alpha < 1:
        raise ParameterError("alpha must lie in [0, 1)")
    f = lambda j: np.exp(-(j - alpha) * kappa / tau) * theta((j - alpha) / tau, r) * theta((j - alpha) / tau) ** (d - 1)  # noqa: E731
    return _geometric_sum(f, kappa / tau) / tau


@dataclass(frozen=True)
class ScalingFit:
    d: int
    alpha: float
    kappas: tuple
    values: tuple
    slope: float
    r2: float
    expected: float


def kernel_scaling_check(d: int, kappas: Sequence[float], tau: Optional[float] = None, alpha: float = 0.0) -> ScalingFit:
    """Log-log slope of the squared-Green diagonal against kappa."""
    kappas = sorted(float(k) for k in kappas)
    if len(kappas) < 3 or kappas[-1] / kappas[0] < 4 or kappas[0] < 1:
        raise ParameterError("need at least three kappas >= 1 spanning a factor 4")
    tau = tau or 1e3 * kappas[-1]
    vals = [squared_green_diag(d, k, tau, alpha) for k in kappas]
    slope, _, r2 = fit_loglog(kappas, vals)
    if r2 < 0.95:
        raise ConvergenceError(f"log-log fit quality R^2 = {r2:.3f} too low")
    return ScalingFit(d, alpha, tuple(kappas), tuple(vals), slope, r2, -(2 - d / 2))


@dataclass(frozen=True)
class DecayFit:
    kappa: float
    rate: float  # fitted exponential rate in |x - y|
    rate_over_sqrt_kappa: float


def decay_rate(d: int, kappa: float, tau: Optional[float] = None, alpha: float = 0.0,
               r_range: tuple = (0.3, 0.5), n: int = 9) -> DecayFit:
    """Exponential rate of the off-diagonal kernel out to the torus half-width.

    On the unit torus separations never exceed 1/2 per axis, so the fit runs
    over the largest available distances instead of |x - y| > 1.
    """
    tau = tau or 1e3 * kappa
    rs = np.linspace(*r_range, n)
    vals = np.array([green_offdiag(d, kappa, tau, alpha, r) for r in rs])
    if np.any(vals <= 0):
        raise ConvergenceError("kernel not positive on the fit window")
    slope, _, _ = fit_linear(rs, np.log(vals))
    return DecayFit(kappa, -slope, -slope / math.sqrt(kappa))
