"""Monte Carlo on the truncated classical field.

phi(x) = sum_n omega_n / sqrt(lambda_n) u_n(x) with omega_n i.i.d. standard
complex Gaussians: E|omega|^2 = 1, so real and imaginary parts each have
variance 1/2. Getting this wrong doubles every covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import ConvergenceError, InvariantViolation, ParameterError
from .expansion import CorrelationKernel, Interaction, Observable, hermitize, mode_tuples
from .spectral import TorusBasis

InteractionRegime = Literal["wick", "plain", "local"]
MIN_ESS = 50.0
CHUNK = 4096


@dataclass(frozen=True)
class MCEstimate:
    mean: complex
    stderr: float
    count: int
    seed: Optional[int] = None

    def within(self, target: float, n_se: float = 4.0, floor: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_se * self.stderr + floor


@dataclass(frozen=True)
class FieldSample:
    """One or many draws; ``amplitudes`` has shape (n, modes)."""

    basis: TorusBasis
    omega: np.ndarray
    seed: Optional[int] = None

    @property
    def amplitudes(self) -> np.ndarray:
        return self.omega / np.sqrt(self.basis.eigenvalues)[None, :]

    def __len__(self) -> int:
        return self.omega.shape[0]

    def grid_values(self, N: Optional[int] = None) -> np.ndarray:
        """phi on the N^d grid, shape (n, N, ..., N)."""
        N = N or anti_alias_grid(self.basis)
        return _synthesize(self.basis, self.amplitudes, N)

    def restrict(self, small: TorusBasis) -> "FieldSample":
        """Same omega on the modes of a smaller cutoff (coupled sampling)."""
        if small.d != self.basis.d or small.K > self.basis.K:
            raise ParameterError("restriction needs a nested cutoff")
        cols = [self.basis.index(n) for n in small.modes]
        return FieldSample(small, self.omega[:, cols], self.seed)


def anti_alias_grid(basis: TorusBasis) -> int:
    # |phi|^2 has degree 2K, |phi|^4 degree 4K
    return 4 * basis.K + 2


def standard_complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Density pi^{-1} e^{-|z|^2}: real and imaginary parts N(0, 1/2)."""
    s = math.sqrt(0.5)
    return rng.normal(0.0, s, shape) + 1j * rng.normal(0.0, s, shape)


def sample_field(basis: TorusBasis, rng: np.random.Generator | int, n: int = 1) -> FieldSample:
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng) if seed is not None else rng
    return FieldSample(basis, standard_complex_gaussian(gen, (n, len(basis))), seed)


def sample_stream(basis: TorusBasis, n: int, seed: int, chunk: int = CHUNK):
    """Deterministic chunks from spawned seed streams; chunking is part of the seed contract."""
    n_chunks = max(1, math.ceil(n / chunk))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    left = n
    for ss in children:
        k = min(chunk, left)
        yield FieldSample(basis, standard_complex_gaussian(np.random.default_rng(ss), (k, len(basis))), seed)
        left -= k


def sample_ensemble(basis: TorusBasis, n: int, seed: int) -> FieldSample:
    parts = [s.omega for s in sample_stream(basis, n, seed)]
    return FieldSample(basis, np.concatenate(parts, axis=0), seed)


# --- grid synthesis -----------------------------------------------------------------


def _embed(basis: TorusBasis, amps: np.ndarray, N: int) -> np.ndarray:
    d = basis.d
    arr = np.zeros((amps.shape[0],) + (N,) * d, dtype=complex)
    idx = tuple((basis.modes[:, j] % N) for j in range(d))
    arr[(slice(None),) + idx] = amps
    return arr


def _synthesize(basis: TorusBasis, amps: np.ndarray, N: int) -> np.ndarray:
    axes = tuple(range(1, basis.d + 1))
    return np.fft.ifftn(_embed(basis, amps, N), axes=axes) * N**basis.d


def density_modes(sample: FieldSample, R: int) -> tuple[np.ndarray, np.ndarray]:
    """Fourier coefficients h_q of |phi|^2 for |q|_inf <= R (R <= 2K), exact.

    Returns (q list, values of shape (n, len(q))).
    """
    b = sample.basis
    N = anti_alias_grid(b)
    phi = _synthesize(b, sample.amplitudes, N)
    axes = tuple(range(1, b.d + 1))
    h = np.fft.fftn(np.abs(phi) ** 2, axes=axes) / N**b.d
    from .spectral import build_basis

    box = build_basis(b.d, R, 1.0)
    idx = tuple((box.modes[:, j] % N) for j in range(b.d))
    return box.modes, h[(slice(None),) + idx]


def interaction_value(
    sample: FieldSample,
    interaction: Interaction,
    regime: InteractionRegime = "wick",
    alpha: float = 1.0,
) -> np.ndarray:
    """W per draw.

    wick:  1/2 sum_q w_hat(q) |h_q - rho delta_q0|^2, rho = sum_n 1/lambda_n
    plain: 1/2 sum_q w_hat(q) |h_q|^2
    local: alpha/2 int |phi|^4, exact on the anti-aliased grid
    """
    b = sample.basis
    if regime == "local":
        N = anti_alias_grid(b)
        phi = _synthesize(b, sample.amplitudes, N)
        axes = tuple(range(1, b.d + 1))
        return 0.5 * alpha * np.mean(np.abs(phi) ** 4, axis=axes)
    if regime not in ("wick", "plain"):
        raise ParameterError(f"unknown regime {regime!r}")
    R = min(interaction.degree, 2 * b.K)
    qs, h = density_modes(sample, R)
    if regime == "wick":
        zero = int(np.nonzero(~np.any(qs, axis=1))[0][0])
        h = h.copy()
        h[:, zero] -= np.sum(1.0 / b.eigenvalues)
    wq = np.array([interaction.coeff(q) for q in qs])
    W = 0.5 * np.sum(wq[None, :] * np.abs(h) ** 2, axis=1)
    if all(v >= 0 for v in interaction.table.values()):
        scale = 0.5 * np.sum(np.abs(wq)[None, :] * np.abs(h) ** 2, axis=1) + 1e-300
        if np.any(W < -1e-9 * scale):
            raise InvariantViolation(f"negative interaction {W.min()} for positive-type w")
    return W


def expected_wick_interaction(basis: TorusBasis, interaction: Interaction) -> float:
    """E[W] for the Wick-ordered interaction: 1/2 sum_q w_hat(q) sum_{b-a=q} G_a G_b."""
    g = 1.0 / basis.eigenvalues
    total = 0.0
    for i, a in enumerate(basis.modes):
        for j, b in enumerate(basis.modes):
            total += interaction.coeff(b - a) * g[i] * g[j]
    return 0.5 * total


def zero_field_wick_value(basis: TorusBasis, interaction: Interaction) -> float:
    rho = float(np.sum(1.0 / basis.eigenvalues))
    return 0.5 * interaction.coeff(np.zeros(basis.d, int)) * rho**2


# --- observables and estimators --------------------------------------------------------


def observable_values(sample: FieldSample, obs: Observable) -> np.ndarray:
    """Classical Theta(xi) per draw: conj(phi_k)... phi_l... for rank-one terms."""
    a = sample.amplitudes
    if obs.kind == "identity":
        return np.sum(np.abs(a) ** 2, axis=1) ** obs.p + 0j
    out = np.zeros(len(sample), dtype=complex)
    for c, ks, ls in obs.terms:
        term = np.full(len(sample), c, dtype=complex)
        for k in ks:
            term *= np.conj(a[:, k])
        for l in ls:
            term *= a[:, l]
        out += term
    return out


def _weights(W: np.ndarray, z: float) -> np.ndarray:
    w = np.exp(-z * (W - W.min())) if z else np.ones_like(W)
    ess = w.sum() ** 2 / np.sum(w**2)
    if ess < MIN_ESS:
        raise ConvergenceError(f"effective sample size {ess:.1f} below {MIN_ESS}")
    return w


def ratio_estimate(values: np.ndarray, w: np.ndarray, seed=None) -> MCEstimate:
    """Self-normalized ratio with delta-method standard error."""
    sw = w.sum()
    r = np.sum(w * values) / sw
    se = math.sqrt(float(np.sum(w**2 * np.abs(values - r) ** 2)) / sw**2)
    mean = complex(r)
    return MCEstimate(mean.real if abs(mean.imag) <= 4 * se + 1e-300 and np.isrealobj(values) else mean, se, len(values), seed)


def reweighted_expectation(
    interaction: Interaction,
    obs: Observable,
    samples: FieldSample,
    z: float = 1.0,
    regime: InteractionRegime = "wick",
) -> MCEstimate:
    if z < 0:
        raise ParameterError("z must be nonnegative")
    if len(samples) < 1000:
        raise ParameterError("need at least 10^3 samples")
    W = interaction_value(samples, interaction, regime) if z else np.zeros(len(samples))
    vals = observable_values(samples, obs)
    est = ratio_estimate(vals, _weights(W, z), samples.seed)
    mean = est.mean
    if abs(np.imag(mean)) <= 4 * est.stderr:
        mean = float(np.real(mean))
    return MCEstimate(mean, est.stderr, est.count, est.seed)


def cauchy_check(
    bases: Sequence[TorusBasis],
    interaction: Interaction,
    n: int,
    seed: int,
    regime: InteractionRegime = "wick",
) -> list[MCEstimate]:
    """E|W_{[K_{j+1}]} - W_{[K_j]}|^2 for consecutive cutoffs, coupled draws."""
    bases = sorted(bases, key=lambda b: b.K)
    top = bases[-1]
    diffs: list[list[np.ndarray]] = [[] for _ in range(len(bases) - 1)]
    for chunk in sample_stream(top, n, seed):
        Ws = [interaction_value(chunk.restrict(b), interaction, regime) for b in bases]
        for j in range(len(bases) - 1):
            diffs[j].append(np.abs(Ws[j + 1] - Ws[j]) ** 2)
    out = []
    for d in diffs:
        v = np.concatenate(d)
        out.append(MCEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), len(v), seed))
    return out


def classical_gamma(
    interaction: Interaction,
    p: int,
    samples: FieldSample,
    z: float = 1.0,
    regime: InteractionRegime = "wick",
) -> CorrelationKernel:
    """gamma(k;l) = rho(conj(phi_l) phi_k), with standard errors."""
    if p not in (1, 2):
        raise ParameterError("p must be 1 or 2")
    W = interaction_value(samples, interaction, regime) if z else np.zeros(len(samples))
    w = _weights(W, z)
    w = w / w.sum()
    a = samples.amplitudes
    tuples = mode_tuples(len(samples.basis), p)
    prod = np.ones((len(samples), len(tuples)), dtype=complex)
    for r in range(p):
        prod *= a[:, [t[r] for t in tuples]]
    G = prod.T @ (w[:, None] * np.conj(prod))
    # delta-method SE per entry, sum_i w_i^2 |x_i - G|^2
    SE = np.zeros(G.shape)
    for i in range(len(tuples)):
        x = prod[:, i][:, None] * np.conj(prod)
        SE[i] = np.sqrt(np.sum((w**2)[:, None] * np.abs(x - G[i][None, :]) ** 2, axis=0))
    H, dev = hermitize(G)
    return CorrelationKernel(p, H, f"classical MC n={len(samples)} seed={samples.seed}", dev, SE)
