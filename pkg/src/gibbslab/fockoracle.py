"""Brute-force bosonic Fock space over a finite mode set.

States are occupation vectors with total particle number at most ``cap``,
ordered by total number and then lexicographically, so each particle-number
sector is a contiguous slice. Everything the expansion computes diagrammatically
can be recomputed here from matrices.

Truncation: products whose annihilators act before their creators (reading
right to left) never leave the cap, so H0, W and the number-conserving
observables are exact on the truncated space. General monomials are not, and
``quasi_free_expectation`` reports how much a doubled cap moves the value.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import ParameterError, ResourceCapError
from .expansion import CorrelationKernel, Interaction, hermitize, mode_tuples
from .linalg import numpy_eigh, sym_matrix_function
from .pairing import perfect_matchings
from .spectral import TorusBasis, bose_green

DEFAULT_DIM_CAP = 5000

Kind = Literal["create", "annihilate"]
# monomial letter: (mode position, +1 creation / -1 annihilation)
Letter = tuple[int, int]


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FockSpace:
    basis: TorusBasis
    cap: int
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if self.cap < 0:
            raise ParameterError("particle cap must be nonnegative")
        if self.dim > self.dim_cap:
            raise ResourceCapError(f"Fock dimension {self.dim} exceeds cap {self.dim_cap}")

    @property
    def n_modes(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int:
        return math.comb(self.n_modes + self.cap, self.cap)

    @cached_property
    def states(self) -> np.ndarray:
        M = self.n_modes
        out = []
        for n in range(self.cap + 1):
            # compositions of n into M parts, lexicographically descending
            sector = [c for c in _compositions(n, M)]
            out.extend(sector)
        return np.array(out, dtype=int).reshape(-1, M)

    @cached_property
    def _lookup(self) -> dict:
        return {tuple(s): i for i, s in enumerate(self.states)}

    def index(self, occ: Sequence[int]) -> int:
        return self._lookup[tuple(int(x) for x in occ)]

    @cached_property
    def totals(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def sector(self, n: int) -> slice:
        lo = math.comb(self.n_modes + n - 1, n - 1) if n > 0 else 0
        return slice(lo, math.comb(self.n_modes + n, n))

    def sectors(self) -> list[slice]:
        return [self.sector(n) for n in range(self.cap + 1)]

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim)
        v[0] = 1.0
        return v


def _compositions(n: int, M: int):
    if M == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, M - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class FockOperator:
    matrix: np.ndarray
    label: str = ""

    @property
    def hermitian(self) -> bool:
        a = self.matrix
        scale = max(np.max(np.abs(a), initial=0.0), 1e-300)
        return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= 1e-12 * scale)


# --- ladder operators ----------------------------------------------------------


_LADDER_CACHE: dict = {}


def _ladder_sparse(fs: FockSpace, k: int, delta: int) -> sp.csr_matrix:
    """b*_k (delta=+1) or b_k (delta=-1), unscaled, sparse."""
    key = (fs.basis, fs.cap, k, delta)
    if key in _LADDER_CACHE:
        return _LADDER_CACHE[key]
    if not 0 <= k < fs.n_modes:
        raise ParameterError(f"mode index {k} out of range")
    rows, cols, vals = [], [], []
    for j, s in enumerate(fs.states):
        occ = s[k]
        if delta == 1:
            if fs.totals[j] == fs.cap:
                continue
            t = s.copy()
            t[k] += 1
            rows.append(fs.index(t))
            cols.append(j)
            vals.append(math.sqrt(occ + 1))
        else:
            if occ == 0:
                continue
            t = s.copy()
            t[k] -= 1
            rows.append(fs.index(t))
            cols.append(j)
            vals.append(math.sqrt(occ))
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(fs.dim, fs.dim))
    _LADDER_CACHE[key] = mat
    return mat


def ladder(fs: FockSpace, k: int, kind: Kind, tau: Optional[float] = None) -> FockOperator:
    """b_k / b*_k, or phi_{tau,k} = tau^{-1/2} b_k when tau is given."""
    delta = {"create": 1, "annihilate": -1}.get(kind)
    if delta is None:
        raise ParameterError(f"unknown ladder kind {kind!r}")
    mat = _ladder_sparse(fs, k, delta).toarray()
    if tau is not None:
        mat = mat / math.sqrt(tau)
    name = ("phi" if tau else "b") + ("*" if delta == 1 else "") + f"_{k}"
    return FockOperator(mat, name)


def _phi(fs: FockSpace, k: int, delta: int, tau: float) -> sp.csr_matrix:
    return _ladder_sparse(fs, k, delta) / math.sqrt(tau)


def _h0_diag(fs: FockSpace, tau: float) -> np.ndarray:
    return fs.states @ fs.basis.eigenvalues / tau


def number_operator(fs: FockSpace, tau: float) -> FockOperator:
    """Rescaled particle number N_tau = sum_k phi*_k phi_k."""
    return FockOperator(np.diag(fs.totals / tau), "N_tau")


def mode_observable(fs: FockSpace, tau: float, ks: Sequence[int], ls: Sequence[int]) -> FockOperator:
    """phi*_{k_1}..phi*_{k_p} phi_{l_1}..phi_{l_p}."""
    op = sp.identity(fs.dim, format="csr")
    for k in ks:
        op = op @ _phi(fs, k, 1, tau)
    for l in ls:
        op = op @ _phi(fs, l, -1, tau)
    return FockOperator(op.toarray(), f"phi*{tuple(ks)} phi{tuple(ls)}")


# --- Hamiltonians -----------------------------------------------------------------


@dataclass(frozen=True)
class Hamiltonians:
    H0: FockOperator
    W: FockOperator
    Wplain: FockOperator


def _density_modes(fs: FockSpace, tau: float, q: np.ndarray) -> sp.csr_matrix:
    """D0(q) = sum_k phi*_{k+q} phi_k over k, k+q in the basis."""
    b = fs.basis
    out = sp.csr_matrix((fs.dim, fs.dim))
    for j, k in enumerate(b.modes):
        kq = k + q
        if b.contains(kq):
            out = out + _phi(fs, b.index(kq), 1, tau) @ _phi(fs, j, -1, tau)
    return out


def hamiltonians(fs: FockSpace, tau: float, interaction: Interaction) -> Hamiltonians:
    """H0, the renormalized W and the normal-ordered plain W.

    W = 1/2 sum_q w_hat(q) D(q)^dag D(q) with D(q) = D0(q) - rho delta_{q,0};
    Wplain = 1/2 sum_q w_hat(q) [D0(q)^dag D0(q) - (1/tau) sum_{b, b-q in B} phi*_b phi_b].
    Only |q|_inf <= 2K can act nontrivially on the basis.
    """
    b = fs.basis
    if interaction.d != b.d:
        raise ParameterError("dimension mismatch")
    if any(v < 0 for v in interaction.table.values()) and interaction.regime == "positive":
        raise ParameterError("renormalized regime needs w_hat >= 0")
    rho = float(np.sum(bose_green(b.eigenvalues, tau)))
    eye = sp.identity(fs.dim, format="csr")
    W = sp.csr_matrix((fs.dim, fs.dim))
    Wp = sp.csr_matrix((fs.dim, fs.dim))
    n_diag = fs.states / tau
    for q, wq in interaction.table.items():
        qv = np.asarray(q)
        if wq == 0.0 or np.max(np.abs(qv)) > 2 * b.K:
            continue
        D0 = _density_modes(fs, tau, qv)
        D = D0 - rho * eye if not np.any(qv) else D0
        W = W + 0.5 * wq * (D.T.conj() @ D)
        shift = [j for j, k in enumerate(b.modes) if b.contains(k - qv)]
        corr = sp.diags(n_diag[:, shift].sum(axis=1) / tau) if shift else 0.0
        Wp = Wp + 0.5 * wq * (D0.T.conj() @ D0 - corr)
    H0 = np.diag(_h0_diag(fs, tau))
    return Hamiltonians(FockOperator(H0, "H0"), FockOperator(W.toarray(), "W"), FockOperator(Wp.toarray(), "Wplain"))


def pick_interaction_operator(h: Hamiltonians, regime: str) -> np.ndarray:
    return h.W.matrix if regime == "positive" else h.Wplain.matrix


# --- quasi-free state and Wick ------------------------------------------------------


def _gibbs_weights(fs: FockSpace, tau: float) -> np.ndarray:
    e = _h0_diag(fs, tau)
    w = np.exp(-(e - e.min()))
    return w / w.sum()


def _monomial_trace(fs: FockSpace, tau: float, monomial: Sequence[Letter]) -> float:
    op = sp.identity(fs.dim, format="csr")
    for k, delta in monomial:
        op = op @ _phi(fs, k, delta, tau)
    return float(np.dot(op.diagonal(), _gibbs_weights(fs, tau)))


def quasi_free_expectation(fs: FockSpace, tau: float, monomial: Sequence[Letter], check: bool = True) -> float:
    """rho_0(A_1...A_n) for phi-letters (k, +1|-1), as an exact truncated trace."""
    val = _monomial_trace(fs, tau, monomial)
    if check and monomial:
        big = FockSpace(fs.basis, 2 * fs.cap, dim_cap=max(fs.dim_cap, 10**6))
        ref = _monomial_trace(big, tau, monomial)
        if abs(ref - val) > 1e-8 * max(abs(ref), 1e-300) and abs(ref - val) > 1e-14:
            warnings.warn(f"cap {fs.cap} truncation moves value {val} -> {ref}", TruncationWarning)
    return val


def two_point(basis: TorusBasis, tau: float, a: Letter, b: Letter) -> float:
    """rho_0(A B) for single phi-letters."""
    (k, da), (l, db) = a, b
    if k != l or da == db:
        return 0.0
    g = float(bose_green(basis.eigenvalues[k], tau))
    return g if da == 1 else g + 1.0 / tau


@dataclass(frozen=True)
class WickCheck:
    lhs: float
    rhs: float
    gap: float


def wick_rhs(basis: TorusBasis, tau: float, monomial: Sequence[Letter]) -> float:
    n = len(monomial)
    if n % 2:
        return 0.0
    total = 0.0
    for match in perfect_matchings(n, lambda a, b: monomial[a][1] != monomial[b][1] and monomial[a][0] == monomial[b][0]):
        prod = 1.0
        for a, b in match:
            prod *= two_point(basis, tau, monomial[a], monomial[b])
        total += prod
    return total


def wick_check(fs: FockSpace, tau: float, monomial: Sequence[Letter]) -> WickCheck:
    if len(monomial) > 8:
        raise ParameterError("monomials longer than 8 are not supported")
    lhs = quasi_free_expectation(fs, tau, monomial, check=False)
    rhs = wick_rhs(fs.basis, tau, monomial)
    return WickCheck(lhs, rhs, abs(lhs - rhs))


# --- interacting state ---------------------------------------------------------------


def _restricted_trace(A: np.ndarray, blocks: list) -> float:
    return float(sum(np.real(np.sum(A[s, s].T * B)) for s, B in blocks))


def _state_blocks(fs: FockSpace, tau: float, eta: float, z: float, Wmat: np.ndarray) -> list:
    """Per-sector e^{-eta H0} e^{-(1-2eta)H0 - zW} e^{-eta H0}, shifted by e^{E0}."""
    e = _h0_diag(fs, tau)
    shift = e.min()
    out = []
    for s in fs.sectors():
        h = np.diag(e[s] - shift)
        A = (1 - 2 * eta) * h + z * Wmat[s, s]
        mid = sym_matrix_function(0.5 * (A + A.T), lambda x: np.exp(-x), eig=numpy_eigh)
        side = np.exp(-eta * (e[s] - shift))
        out.append((s, side[:, None] * mid * side[None, :]))
    return out


def _free_norm(fs: FockSpace, tau: float) -> float:
    e = _h0_diag(fs, tau)
    return float(np.sum(np.exp(-(e - e.min()))))


def full_state_expectation(
    fs: FockSpace,
    tau: float,
    eta: float,
    z: float,
    theta: FockOperator,
    interaction: Interaction,
) -> float:
    """tr(Theta e^{-eta H0} e^{-(1-2eta)H0 - zW} e^{-eta H0}) / tr e^{-H0}.

    The normalizing trace is the truncated one, so Theta = I, z = 0 gives 1.
    """
    if z < 0:
        raise ParameterError("only real z >= 0 is supported")
    Wmat = pick_interaction_operator(hamiltonians(fs, tau, interaction), interaction.regime)
    blocks = _state_blocks(fs, tau, eta, z, Wmat)
    return _restricted_trace(theta.matrix, blocks) / _free_norm(fs, tau)


def duhamel_time_product(
    fs: FockSpace,
    tau: float,
    m: int,
    t: Sequence[float],
    theta: FockOperator,
    interaction: Interaction,
) -> float:
    """tr(Theta e^{-(1-t_1)H0} W e^{-(t_1-t_2)H0} ... W e^{-t_m H0}) / tr e^{-H0}.

    The expansion integrand f_m equals 2^m times this, because its
    interaction factor carries w without the 1/2 of W.
    """
    t = list(t)
    if len(t) != m or any(b >= a for a, b in zip(t, t[1:])) or (m and (t[0] > 1 or t[-1] < 0)):
        raise ParameterError("t must be a point of the simplex 1 >= t_1 > ... > t_m >= 0")
    e = _h0_diag(fs, tau)
    shift = e.min()
    Wmat = pick_interaction_operator(hamiltonians(fs, tau, interaction), interaction.regime)
    times = [1.0] + t + [0.0]
    total = 0.0
    for s in fs.sectors():
        es = e[s] - shift
        P = np.diag(np.exp(-(times[0] - times[1]) * es))
        for j in range(1, m + 1):
            P = P @ Wmat[s, s] * np.exp(-(times[j] - times[j + 1]) * es)[None, :]
        total += float(np.real(np.sum(theta.matrix[s, s].T * P)))
    return total / _free_norm(fs, tau)


def exact_coefficients(
    fs: FockSpace,
    tau: float,
    eta: float,
    M: int,
    theta: FockOperator,
    interaction: Interaction,
) -> np.ndarray:
    """Taylor coefficients a_0..a_{M-1} of z -> A(z) from one block exponential.

    The upper block-bidiagonal matrix with X = -(1-2eta)H0 on the diagonal and
    Y = -W above it has exp whose (0, m) block is the z^m coefficient of
    exp(X + zY).
    """
    e = _h0_diag(fs, tau)
    shift = e.min()
    Wmat = pick_interaction_operator(hamiltonians(fs, tau, interaction), interaction.regime)
    coeffs = np.zeros(M)
    for s in fs.sectors():
        n = s.stop - s.start
        X = -(1 - 2 * eta) * np.diag(e[s] - shift)
        big = np.zeros((M * n, M * n))
        for j in range(M):
            big[j * n:(j + 1) * n, j * n:(j + 1) * n] = X
            if j + 1 < M:
                big[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = -Wmat[s, s]
        E = expm(big)
        side = np.exp(-eta * (e[s] - shift))
        th = theta.matrix[s, s]
        for j in range(M):
            blk = side[:, None] * E[:n, j * n:(j + 1) * n] * side[None, :]
            coeffs[j] += float(np.real(np.sum(th.T * blk)))
    return coeffs / _free_norm(fs, tau)


def exact_correlation(
    fs: FockSpace,
    tau: float,
    eta: float,
    z: float,
    p: int,
    interaction: Interaction,
) -> CorrelationKernel:
    """gamma(k;l) = tilde-rho(phi*_l phi_k) / tilde-rho(I)."""
    if p not in (1, 2):
        raise ParameterError("p must be 1 or 2")
    Wmat = pick_interaction_operator(hamiltonians(fs, tau, interaction), interaction.regime)
    blocks = _state_blocks(fs, tau, eta, z, Wmat)
    norm = sum(float(np.trace(B)) for _, B in blocks)
    tuples = mode_tuples(fs.n_modes, p)
    G = np.zeros((len(tuples), len(tuples)))
    for i, k in enumerate(tuples):
        for j, l in enumerate(tuples):
            op = mode_observable(fs, tau, l, k)
            G[i, j] = _restricted_trace(op.matrix, blocks) / norm
    H, dev = hermitize(G)
    return CorrelationKernel(p, H, f"fock tau={tau:g} cap={fs.cap}", dev)
