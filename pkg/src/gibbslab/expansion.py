"""Diagrammatic evaluation of the perturbative coefficients.

A pairing value is an integral over one torus variable per collapsed vertex of
a product of edge kernels J_e, interaction factors w(y_i1 - y_i2) and the
observable kernel. All factors are band-limited, so the uniform grid rule is
exact once the grid resolves the total degree in each variable. The integral
is done by variable elimination with a batch axis that runs over simplex
quadrature nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from . import pairing as pr
from .errors import InvariantViolation, ParameterError
from .linalg import simplex_rule
from .spectral import FOUR_PI2, TorusBasis, bose_green, build_basis, grid_points

Regime = Literal["positive", "plain"]


# --- interaction ------------------------------------------------------------


@dataclass(frozen=True)
class Interaction:
    """Even real Fourier coefficients w_hat(q), q in Z^d, finitely many nonzero.

    ``positive``: renormalized setting, needs w_hat >= 0.
    ``plain``: unrenormalized (normal-ordered) setting, needs w >= 0 pointwise.
    """

    d: int
    coeffs: tuple[tuple[tuple[int, ...], float], ...]
    regime: Regime = "positive"

    def __post_init__(self):
        table = dict(self.coeffs)
        for q, v in table.items():
            if len(q) != self.d:
                raise ParameterError(f"mode {q} has wrong dimension")
            mq = tuple(-x for x in q)
            if abs(table.get(mq, 0.0) - v) > 1e-14 * max(1.0, abs(v)):
                raise ParameterError(f"w_hat is not even at {q}")
        if self.regime == "positive" and any(v < 0 for v in table.values()):
            raise ParameterError("positive regime needs w_hat >= 0")
        if self.regime == "plain" and table:
            x = grid_points(self.d, 4 * self.degree + 8) if self.d == 1 else grid_points(self.d, 2 * self.degree + 4)
            if np.min(self.real_space(x)) < -1e-12 * max(abs(v) for v in table.values()):
                raise ParameterError("plain regime needs w >= 0 pointwise")
        if self.regime not in ("positive", "plain"):
            raise ParameterError(f"unknown regime {self.regime!r}")

    @cached_property
    def table(self) -> dict:
        return dict(self.coeffs)

    @property
    def degree(self) -> int:
        return max((max(abs(x) for x in q) for q in self.table), default=0)

    def coeff(self, q) -> float:
        return self.table.get(tuple(int(x) for x in np.atleast_1d(q)), 0.0)

    def real_space(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.zeros(len(x))
        for q, v in self.table.items():
            out += v * np.cos(2 * np.pi * (x @ np.asarray(q, float)))
        return out

    def sup_norm(self) -> float:
        return float(sum(abs(v) for v in self.table.values()))

    def box_values(self, basis_K: int) -> tuple[TorusBasis, np.ndarray]:
        """w_hat on the sup-norm box of radius min(degree, 2K).

        Frequencies beyond 2K never survive an integral against kernels of
        degree K, so dropping them is exact.
        """
        R = min(self.degree, 2 * basis_K)
        box = build_basis(self.d, R, 1.0)
        return box, np.array([self.coeff(q) for q in box.modes])

    @staticmethod
    def zero(d: int, regime: Regime = "positive") -> "Interaction":
        return Interaction(d, (), regime)

    @staticmethod
    def fejer(d: int, Kw: int, amp: float, regime: Regime = "positive") -> "Interaction":
        """amp * prod_j (1 - |q_j|/(Kw+1)): positive type and pointwise >= 0."""
        box = build_basis(d, Kw, 1.0)
        vals = amp * np.prod(1.0 - np.abs(box.modes) / (Kw + 1.0), axis=1)
        return Interaction(d, tuple((tuple(int(x) for x in q), float(v)) for q, v in zip(box.modes, vals)), regime)

    @staticmethod
    def from_dict(d: int, table: dict, regime: Regime = "positive") -> "Interaction":
        items = []
        for q, v in table.items():
            q = tuple(int(x) for x in np.atleast_1d(q))
            items.append((q, float(v)))
        return Interaction(d, tuple(sorted(items)), regime)


# --- observables --------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """p-particle kernel.

    ``rank1`` terms (c, ks, ls) stand for c * prod_r u_{k_r}(x_r) conj(u_{l_r}(y_r)),
    which lifts to c * phi*_{k_1}..phi*_{k_p} phi_{l_1}..phi_{l_p}; ks, ls are
    positions in the basis. ``identity`` is prod_r delta(x_r - y_r).
    """

    p: int
    kind: Literal["rank1", "identity"] = "rank1"
    terms: tuple = ()

    @staticmethod
    def scalar() -> "Observable":
        return Observable(0, "rank1", ((1.0, (), ()),))

    @staticmethod
    def mode_projector(ks: Sequence[int], ls: Sequence[int], coef: complex = 1.0) -> "Observable":
        ks, ls = tuple(int(k) for k in ks), tuple(int(l) for l in ls)
        if len(ks) != len(ls):
            raise ParameterError("creation and annihilation lists differ in length")
        return Observable(len(ks), "rank1", ((coef, ks, ls),))

    @staticmethod
    def identity(p: int) -> "Observable":
        return Observable(p, "identity", ())

    @staticmethod
    def from_tensor(T: np.ndarray, tol: float = 0.0) -> "Observable":
        """T[k_1..k_p, l_1..l_p] in mode coordinates."""
        T = np.asarray(T)
        if T.ndim % 2:
            raise ParameterError("tensor must have even order")
        p = T.ndim // 2
        terms = tuple(
            (complex(T[idx]), idx[:p], idx[p:])
            for idx in zip(*np.nonzero(np.abs(T) > tol))
        )
        return Observable(p, "rank1", tuple((c, tuple(map(int, k)), tuple(map(int, l))) for c, k, l in terms))

    def hs_norm(self, n_modes: int) -> float:
        if self.kind == "identity":
            return math.sqrt(n_modes**self.p)
        acc: dict = {}
        for c, ks, ls in self.terms:
            acc[(ks, ls)] = acc.get((ks, ls), 0.0) + c
        return math.sqrt(sum(abs(v) ** 2 for v in acc.values()))

    def normalized(self, n_modes: int) -> bool:
        return self.hs_norm(n_modes) <= 1.0 + 1e-12


# --- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionConfig:
    basis: TorusBasis
    tau: float
    interaction: Interaction
    eta: float = 0.0
    N: Optional[int] = None
    quad_order: int = 12

    def __post_init__(self):
        if not (self.tau > 0):
            raise ParameterError("tau must be positive (math.inf for classical)")
        if not 0.0 <= self.eta <= 0.25:
            raise ParameterError("eta must lie in [0, 1/4]")
        if self.interaction.d != self.basis.d:
            raise ParameterError("interaction and basis dimensions differ")
        if self.N is not None and self.N < self.required_grid:
            raise ParameterError(f"grid N={self.N} too coarse; need N >= {self.required_grid}")

    @property
    def classical(self) -> bool:
        return math.isinf(self.tau)

    @property
    def pairing_class(self) -> pr.PairingClass:
        return "P" if self.interaction.regime == "positive" else "N"

    @property
    def ordering(self) -> pr.Ordering:
        return "renormalized" if self.interaction.regime == "positive" else "lexicographic"

    @property
    def required_grid(self) -> int:
        K = self.basis.K
        Kw = min(self.interaction.degree, 2 * K)
        # two kernels plus either w or the observable meet in one variable
        return max(2 * (2 * K + 1), 2 * K + max(K, Kw) + 1)

    @property
    def grid(self) -> int:
        return self.N or self.required_grid

    def with_tau(self, tau: float) -> "ExpansionConfig":
        return ExpansionConfig(self.basis, tau, self.interaction, self.eta, self.N, self.quad_order)

    def classical_limit(self) -> "ExpansionConfig":
        return self.with_tau(math.inf)


@dataclass
class _GridData:
    """Per-config cached grid arrays."""

    C: np.ndarray
    S: np.ndarray
    U: np.ndarray
    Wmat: np.ndarray
    delta: np.ndarray
    cell: float


_GRID_CACHE: dict = {}


def _grid_data(cfg: ExpansionConfig) -> _GridData:
    key = (cfg.basis.d, cfg.basis.K, cfg.grid, cfg.interaction.coeffs)
    if key in _GRID_CACHE:
        return _GRID_CACHE[key]
    basis, N = cfg.basis, cfg.grid
    x = grid_points(basis.d, N)
    phase = 2 * np.pi * (x @ basis.modes.T)
    C, S = np.cos(phase), np.sin(phase)
    box, wv = cfg.interaction.box_values(basis.K)
    wph = 2 * np.pi * (x @ box.modes.T)
    wc, ws = np.cos(wph), np.sin(wph)
    Wmat = (wc * wv) @ wc.T + (ws * wv) @ ws.T
    # band-limited delta over the basis modes, scaled so that the grid sum
    # (cell-weighted) reproduces the identity on band-limited functions
    delta = C @ C.T + S @ S.T
    data = _GridData(C, S, np.exp(1j * phase), Wmat, delta, 1.0 / N**basis.d)
    _GRID_CACHE[key] = data
    return data


# --- edge kernels ---------------------------------------------------------------


def edge_symbol(cfg: ExpansionConfig, sigma: int, ds) -> np.ndarray:
    """Mode values of J_e for time difference(s) ds = s_a - s_b (a before b).

    Returns shape (len(ds), n_modes) for array input.
    """
    lam = cfg.basis.eigenvalues
    ds = np.atleast_1d(np.asarray(ds, dtype=float))
    if cfg.classical:
        return np.broadcast_to(1.0 / lam, (len(ds), len(lam))).copy()
    targ = sigma * ds
    if np.any(targ <= -1.0):
        raise InvariantViolation(f"G time argument {targ.min()} <= -1")
    vals = bose_green(lam[None, :], cfg.tau, targ[:, None])
    if sigma == 1:
        if np.any(ds < 0):
            raise InvariantViolation(f"S time argument {ds.min()} < 0")
        vals = vals + np.exp(-ds[:, None] * lam[None, :] / cfg.tau) / cfg.tau
    return vals


def edge_kernel(cfg: ExpansionConfig, sigma: int, s_a: float, s_b: float) -> np.ndarray:
    """J_e on the grid (P x P) for a single time pair."""
    v = edge_symbol(cfg, sigma, [s_a - s_b])[0]
    g = _grid_data(cfg)
    return (g.C * v) @ g.C.T + (g.S * v) @ g.S.T


# --- contraction ----------------------------------------------------------------


@dataclass
class _Factor:
    vars: tuple[int, ...]
    data: np.ndarray
    batched: bool


def _elimination_order(nvars: int, scopes: Sequence[tuple[int, ...]]) -> list[int]:
    """Greedy min-size elimination."""
    scopes = [set(s) for s in scopes]
    remaining = set(range(nvars))
    order = []
    while remaining:
        best, best_cost = None, None
        for v in sorted(remaining):
            nb = set().union(*[s for s in scopes if v in s]) - {v}
            cost = len(nb)
            if best_cost is None or cost < best_cost:
                best, best_cost = v, cost
        order.append(best)
        touched = [s for s in scopes if best in s]
        merged = set().union(*touched) - {best} if touched else set()
        scopes = [s for s in scopes if best not in s] + [merged]
        remaining.remove(best)
    return order


_LETTERS = "abcdefghijklmnopqrstuvwxy"


def _contract(nvars: int, factors: list[_Factor], order: Sequence[int], cell: float, batch: int):
    facs = list(factors)
    for v in order:
        hit = [f for f in facs if v in f.vars]
        rest = [f for f in facs if v not in f.vars]
        if not hit:
            # free variable: integrates to 1 on the unit torus
            continue
        out_vars = tuple(sorted(set().union(*[f.vars for f in hit]) - {v}))
        anyb = any(f.batched for f in hit)
        ins = [("Z" if f.batched else "") + "".join(_LETTERS[u] for u in f.vars) for f in hit]
        out = ("Z" if anyb else "") + "".join(_LETTERS[u] for u in out_vars)
        data = np.einsum(",".join(ins) + "->" + out, *[f.data for f in hit]) * cell
        facs = rest + [_Factor(out_vars, data, anyb)]
    total = np.ones(batch, dtype=complex)
    for f in facs:
        total = total * (f.data if f.batched else f.data * np.ones(batch))
    return total


@dataclass
class _Plan:
    graph: pr.CollapsedGraph
    index: dict
    order: list


_PLAN_CACHE: dict = {}


def _plan(pairing: pr.Pairing, obs_kind: str) -> _Plan:
    key = (pairing.edges, pairing.vertex_set.m, pairing.vertex_set.p, obs_kind)
    if key in _PLAN_CACHE:
        return _PLAN_CACHE[key]
    g = pr.collapse(pairing, "standard")
    index = {a: k for k, a in enumerate(g.vertices)}
    scopes = []
    for e in g.edges:
        scopes.append((index[e.a],) if e.is_loop else (index[e.a], index[e.b]))
    for i in range(1, g.m + 1):
        scopes.append((index[(i, 1)], index[(i, 2)]))
    if obs_kind == "identity":
        for r in range(1, g.p + 1):
            scopes.append((index[(g.m + 1, r, 1)], index[(g.m + 1, r, -1)]))
    plan = _Plan(g, index, _elimination_order(len(g.vertices), scopes))
    _PLAN_CACHE[key] = plan
    return plan


def _pairing_values(
    cfg: ExpansionConfig, pairing: pr.Pairing, obs: Observable, T: np.ndarray
) -> np.ndarray:
    """Complex values at each row of T (shape B x m)."""
    plan = _plan(pairing, obs.kind)
    g, idx = plan.graph, plan.index
    gd = _grid_data(cfg)
    B = T.shape[0]
    full = np.hstack([T, np.zeros((B, 1))]) if g.m else np.zeros((B, 1))
    base: list[_Factor] = []
    for e in g.edges:
        sa, sb = full[:, e.a[0] - 1], full[:, e.b[0] - 1]
        ds = sa - sb
        const = cfg.classical or np.all(ds == ds[0])
        sym = edge_symbol(cfg, e.sigma, ds[:1] if const else ds)
        if e.is_loop:
            # J(y, y) is the constant sum of the symbol
            val = sym.sum(axis=1)
            base.append(_Factor((), val[0] if const else val, not const))
            continue
        if const:
            v = sym[0]
            J = (gd.C * v) @ gd.C.T + (gd.S * v) @ gd.S.T
            base.append(_Factor((idx[e.a], idx[e.b]), J, False))
        else:
            J = np.einsum("pk,bk,qk->bpq", gd.C, sym, gd.C) + np.einsum("pk,bk,qk->bpq", gd.S, sym, gd.S)
            base.append(_Factor((idx[e.a], idx[e.b]), J, True))
    for i in range(1, g.m + 1):
        base.append(_Factor((idx[(i, 1)], idx[(i, 2)]), gd.Wmat, False))
    nv = len(g.vertices)
    if obs.kind == "identity":
        facs = base + [
            _Factor((idx[(g.m + 1, r, 1)], idx[(g.m + 1, r, -1)]), gd.delta, False)
            for r in range(1, g.p + 1)
        ]
        return _contract(nv, facs, plan.order, gd.cell, B)
    total = np.zeros(B, dtype=complex)
    for c, ks, ls in obs.terms:
        facs = list(base)
        for r in range(1, g.p + 1):
            facs.append(_Factor((idx[(g.m + 1, r, 1)],), gd.U[:, ks[r - 1]], False))
            facs.append(_Factor((idx[(g.m + 1, r, -1)],), np.conj(gd.U[:, ls[r - 1]]), False))
        total += c * _contract(nv, facs, plan.order, gd.cell, B)
    return total


def _realify(z, scale=None):
    """Drop an imaginary part that is rounding noise relative to ``scale``
    (the magnitude of the summed contributions, when known)."""
    z = np.asarray(z)
    if scale is None:
        scale = np.abs(z)
    scale = np.maximum(np.asarray(scale, float), 1e-300)
    if np.all(np.abs(z.imag) <= 1e-10 * scale + 1e-15):
        return z.real
    return z


def pairings_for(cfg: ExpansionConfig, m: int, p: int) -> list[pr.Pairing]:
    vs = pr.build_vertex_set(m, p, cfg.ordering)
    return pr.enumerate_pairings(vs, cfg.pairing_class)


def _times(cfg: ExpansionConfig, m: int, t) -> np.ndarray:
    T = np.atleast_2d(np.asarray(t, dtype=float)) if m else np.zeros((1, 0))
    if T.shape[1] != m:
        raise ParameterError(f"need {m} times per point")
    if m and not cfg.classical:
        lo, hi = cfg.eta, 1.0 - cfg.eta
        bad = (T[:, -1] < lo - 1e-15) | (T[:, 0] > hi + 1e-15) | np.any(np.diff(T, axis=1) >= 0, axis=1)
        if np.any(bad):
            raise ParameterError("times must satisfy eta <= t_m < ... < t_1 <= 1 - eta")
    return T


def pairing_value(cfg: ExpansionConfig, pi: pr.Pairing, obs: Observable, t=()):
    """Value of one pairing at simplex point(s) t (ignored classically)."""
    m = pi.vertex_set.m
    if pi.vertex_set.p != obs.p:
        raise ParameterError("observable and pairing disagree on p")
    if pi.cls != cfg.pairing_class or pi.vertex_set.ordering != cfg.ordering:
        raise ParameterError("pairing class/ordering does not match the config")
    T = _times(cfg, m, t) if not cfg.classical else np.zeros((1, m))
    out = _realify(_pairing_values(cfg, pi, obs, T))
    return out if np.ndim(t) == 2 else out[0]


def f_values(cfg: ExpansionConfig, m: int, obs: Observable, T) -> np.ndarray:
    """f(t) = sum over admissible pairings, vectorized over rows of T."""
    T = _times(cfg, m, T)
    if m == 0 and obs.p == 0:
        return np.ones(T.shape[0])
    acc = np.zeros(T.shape[0], dtype=complex)
    mag = np.zeros(T.shape[0])
    for pi in pairings_for(cfg, m, obs.p):
        v = _pairing_values(cfg, pi, obs, T)
        acc += v
        mag += np.abs(v)
    return _realify(acc, mag)


def f_value(cfg: ExpansionConfig, m: int, obs: Observable, t=()):
    return f_values(cfg, m, obs, np.atleast_2d(np.asarray(t, float)) if m else np.zeros((1, 0)))[0]


def coefficient(cfg: ExpansionConfig, m: int, obs: Observable, order: Optional[int] = None, check_tol: Optional[float] = None):
    """a_m for the quantum config, or its classical limit when tau is inf.

    With ``check_tol`` the simplex order is doubled once and a mismatch beyond
    the tolerance raises, reporting both values.
    """
    if m < 0:
        raise ParameterError("m must be nonnegative")
    if cfg.classical or m == 0:
        if m == 0 and obs.p == 0:
            return 1.0
        total = f_values(cfg, m, obs, np.zeros((1, m)) if cfg.classical else np.zeros((1, 0)))[0]
        return (-1) ** m / (math.factorial(m) * 2**m) * total
    q = order or cfg.quad_order
    val = _quantum_coeff(cfg, m, obs, q)
    if check_tol is not None:
        val2 = _quantum_coeff(cfg, m, obs, 2 * q)
        if abs(val2 - val) > check_tol * max(1.0, abs(val2)):
            from .errors import ConvergenceError

            raise ConvergenceError(f"simplex quadrature unsettled: order {q} -> {val!r}, {2 * q} -> {val2!r}")
        val = val2
    return val


def _quantum_coeff(cfg: ExpansionConfig, m: int, obs: Observable, order: int):
    rule = simplex_rule(m, cfg.eta, order)
    f = f_values(cfg, m, obs, rule.nodes)
    pref = (-1) ** m / ((1 - 2 * cfg.eta) ** m * 2**m)
    return pref * np.sum(rule.weights * f)


# --- series -------------------------------------------------------------------------


def fit_growth(values: Sequence[float]) -> tuple[float, float]:
    """(nu, sigma) with |a_m| <= nu sigma^m m! for every given m.

    sigma comes from a least-squares line through log(|a_m|/m!) over m >= 1,
    then nu is the smallest constant making the bound hold.
    """
    a = np.abs(np.asarray(values, dtype=complex))
    ms = np.arange(len(a))
    logf = np.array([math.lgamma(m + 1) for m in ms])
    good = (ms >= 1) & (a > 1e-300)
    if good.sum() >= 2:
        slope = np.polyfit(ms[good], np.log(a[good]) - logf[good], 1)[0]
        sigma = float(np.exp(slope))
    elif good.sum() == 1:
        m0 = int(ms[good][0])
        sigma = float(np.exp((np.log(a[good][0]) - logf[good][0]) / m0))
    else:
        sigma = 0.0
    if sigma == 0.0:
        return float(a[0]) if len(a) else 0.0, 0.0
    # zeros contribute nothing; skipping them avoids 0 * inf when sigma is tiny
    nz = a > 0
    nu = float(np.max(np.exp(np.log(a[nz]) - ms[nz] * np.log(sigma) - logf[nz]))) if nz.any() else 0.0
    return nu, sigma


@dataclass(frozen=True)
class CoefficientSeries:
    values: tuple
    nu: float
    sigma: float
    source: str = ""

    @staticmethod
    def from_values(values: Sequence, source: str = "") -> "CoefficientSeries":
        vals = tuple(complex(v) if np.iscomplexobj(v) and abs(np.imag(v)) > 0 else float(np.real(v)) for v in values)
        nu, sigma = fit_growth(vals)
        return CoefficientSeries(vals, nu, sigma, source)

    def __len__(self) -> int:
        return len(self.values)

    def partial_sum(self, z: complex = 1.0, M: Optional[int] = None):
        M = len(self.values) if M is None else M
        return sum(a * z**m for m, a in enumerate(self.values[:M]))

    def envelope(self, M: int, z: float = 1.0) -> float:
        return self.nu * self.sigma**M * math.factorial(M) * abs(z) ** M


def coefficient_series(cfg: ExpansionConfig, M: int, obs: Observable) -> CoefficientSeries:
    vals = [coefficient(cfg, m, obs) for m in range(M)]
    tag = "classical" if cfg.classical else f"quantum tau={cfg.tau:g} eta={cfg.eta:g}"
    return CoefficientSeries.from_values(vals, tag)


# --- correlation kernels ----------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationKernel:
    """gamma(k;l) in the mode basis; rows/cols index mode p-tuples lexicographically."""

    p: int
    matrix: np.ndarray
    source: str = ""
    hermitian_deviation: float = 0.0
    stderr: Optional[np.ndarray] = None

    def hs_distance(self, other: "CorrelationKernel") -> float:
        return float(np.linalg.norm(self.matrix - other.matrix))

    def trace_distance(self, other: "CorrelationKernel") -> float:
        return float(np.sum(np.linalg.svd(self.matrix - other.matrix, compute_uv=False)))

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


def hermitize(G: np.ndarray) -> tuple[np.ndarray, float]:
    H = 0.5 * (G + G.conj().T)
    dev = float(np.max(np.abs(G - H))) if G.size else 0.0
    if np.max(np.abs(H.imag), initial=0.0) <= 1e-14 * max(1e-300, np.max(np.abs(H), initial=0.0)):
        H = H.real
    return H, dev


def mode_tuples(n_modes: int, p: int) -> list[tuple[int, ...]]:
    import itertools

    return list(itertools.product(range(n_modes), repeat=p))


Resummer = Callable[[CoefficientSeries], complex]


def partial_sum_resummer(series: CoefficientSeries) -> complex:
    return series.partial_sum(1.0)


def correlation_kernel(
    cfg: ExpansionConfig,
    p: int,
    M: int = 3,
    resummer: Resummer = partial_sum_resummer,
    entries: Literal["all", "diagonal"] = "all",
) -> CorrelationKernel:
    """Entry (k;l) = A^{xi_kl}(1)/A^{1}(1) with xi_kl lifting to phi*_l phi_k.

    ``diagonal`` skips k != l, which vanish for translation-invariant
    interactions by momentum conservation.
    """
    if p not in (1, 2):
        raise ParameterError("p must be 1 or 2")
    denom = resummer(coefficient_series(cfg, M, Observable.scalar()))
    if abs(denom) < 1e-10:
        raise InvariantViolation(f"degenerate normalization A(1) = {denom!r}")
    tuples = mode_tuples(len(cfg.basis), p)
    G = np.zeros((len(tuples), len(tuples)), dtype=complex)
    for i, k in enumerate(tuples):
        for j, l in enumerate(tuples):
            if entries == "diagonal" and i != j:
                continue
            obs = Observable.mode_projector(l, k)
            G[i, j] = resummer(coefficient_series(cfg, M, obs)) / denom
    H, dev = hermitize(G)
    tag = "classical" if cfg.classical else f"quantum tau={cfg.tau:g} eta={cfg.eta:g}"
    return CorrelationKernel(p, H, tag, dev)


# --- independent mode-space formulas -------------------------------------------------


def first_order_closed_loop(cfg: ExpansionConfig) -> float:
    """sum_q w_hat(q) sum_k G_k G_{-q-k}: the m=1, p=0 class-P pairing value
    classically, computed in mode space (no grid)."""
    basis = cfg.basis
    g = 1.0 / basis.eigenvalues
    total = 0.0
    for i, k in enumerate(basis.modes):
        for j, k2 in enumerate(basis.modes):
            total += cfg.interaction.coeff(-(k + k2)) * g[i] * g[j]
    return total
