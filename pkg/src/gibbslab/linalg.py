"""Dense real-symmetric eigensolver, matrix functions and quadrature rules."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError, RangeError

__all__ = [
    "SymMatrix",
    "EigDecomposition",
    "SimplexRule",
    "jacobi_eigh",
    "numpy_eigh",
    "sym_matrix_function",
    "gauss_legendre",
    "simplex_rule",
]


@dataclass(frozen=True)
class SymMatrix:
    """Validated dense symmetric matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ParameterError(f"expected a nonempty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("matrix has non-finite entries")
        scale = np.max(np.abs(a)) if a.size else 0.0
        if np.max(np.abs(a - a.T)) > 1e-14 * max(scale, 1e-300):
            raise ParameterError("matrix is not symmetric")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


@dataclass(frozen=True)
class SimplexRule:
    """Quadrature on {eta <= t_m < ... < t_1 <= 1 - eta}.

    ``nodes`` has shape (n_nodes, m); column 0 is t_1 (the largest time).
    """

    m: int
    eta: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def volume(self) -> float:
        return (1.0 - 2.0 * self.eta) ** self.m / factorial(self.m)

    def __len__(self) -> int:
        return len(self.weights)


def _as_matrix(A) -> np.ndarray:
    if isinstance(A, SymMatrix):
        return A.entries
    return SymMatrix(A).entries


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint index pairs per round; n-1 rounds cover every pair once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    k = len(players)
    rounds = []
    for _ in range(k - 1):
        ps, qs = [], []
        for i in range(k // 2):
            a, b = players[i], players[k - 1 - i]
            if a >= 0 and b >= 0:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=int), np.array(qs, dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 60) -> EigDecomposition:
    """Cyclic Jacobi with a fixed round-robin ordering.

    Each round rotates a set of disjoint (p, q) pairs at once, which keeps the
    numpy overhead at O(n) calls per sweep. Eigenvalues come back ascending.
    """
    a = _as_matrix(A).copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return EigDecomposition(a.diagonal().copy(), v)
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return EigDecomposition(np.zeros(n), v)
    rounds = _round_robin(n)
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        if np.max(np.abs(a[off_mask])) <= tol * scale:
            break
        for p, q in rounds:
            apq = a[p, q]
            keep = np.abs(apq) > 1e-300
            if not np.any(keep):
                continue
            p, q, apq = p[keep], q[keep], apq[keep]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            t = sgn / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cc, ss = c[:, None], s[:, None]
            rp, rq = a[p, :], a[q, :]
            a[p, :] = cc * rp - ss * rq
            a[q, :] = ss * rp + cc * rq
            cp, cq = a[:, p], a[:, q]
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    lam = a.diagonal().copy()
    order = np.argsort(lam, kind="stable")
    return EigDecomposition(lam[order], v[:, order])


def numpy_eigh(A) -> EigDecomposition:
    """LAPACK backend with the same return type; used for large Fock blocks."""
    lam, q = np.linalg.eigh(_as_matrix(A))
    return EigDecomposition(lam, q)


def sym_matrix_function(
    A,
    f: Callable[[np.ndarray], np.ndarray],
    eig: Optional[Callable[[np.ndarray], EigDecomposition]] = None,
) -> np.ndarray:
    """Q f(Lambda) Q^T. ``f`` must accept an array of eigenvalues."""
    dec = (eig or jacobi_eigh)(A)
    lam = dec.eigenvalues
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        fl = np.asarray(f(lam), dtype=float)
    bad = ~np.isfinite(fl)
    if np.any(bad):
        raise RangeError(f"f is not finite at eigenvalue {lam[bad][0]!r}")
    q = dec.eigenvectors
    out = (q * fl) @ q.T
    return 0.5 * (out + out.T)


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    if n < 1:
        raise ParameterError("need at least one node")
    if not a < b:
        raise ParameterError("need a < b")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def simplex_rule(m: int, eta: float = 0.0, order: int = 12) -> SimplexRule:
    """Tensor Gauss-Legendre pulled back by s_k = s_{k-1} u_k (Duffy map)."""
    if m < 0 or order < 1:
        raise ParameterError("need m >= 0 and order >= 1")
    if not 0.0 <= eta <= 0.25:
        raise ParameterError(f"eta must lie in [0, 1/4], got {eta}")
    if m == 0:
        return SimplexRule(0, eta, np.zeros((1, 0)), np.ones(1))
    x, w = gauss_legendre(order)
    grids = np.meshgrid(*([x] * m), indexing="ij")
    wgrids = np.meshgrid(*([w] * m), indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    wt = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    s = np.cumprod(u, axis=1)
    # Jacobian of the map is prod_{k<m} s_k
    jac = np.prod(s[:, :-1], axis=1) if m > 1 else np.ones(len(wt))
    length = 1.0 - 2.0 * eta
    nodes = eta + length * s
    return SimplexRule(m, eta, nodes, wt * jac * length**m)
