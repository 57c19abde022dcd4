"""Vertex sets, admissible pairings and their collapsed coloured multigraphs.

A vertex is a triple (i, r, delta): i = 1..m labels interaction factors,
i = m+1 the observable; delta = +1 marks a creation field, -1 an annihilation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Literal, Optional, Sequence

from .errors import InvariantViolation, ParameterError

Vertex = tuple[int, int, int]
Ordering = Literal["renormalized", "lexicographic"]
PairingClass = Literal["P", "N"]
Variant = Literal["standard", "identity"]

DEFAULT_MAX_M = 8


@dataclass(frozen=True)
class VertexSet:
    m: int
    p: int
    ordering: Ordering
    vertices: tuple[Vertex, ...]

    def rank(self, v: Vertex) -> int:
        return self.vertices.index(v)

    def __len__(self) -> int:
        return len(self.vertices)


def build_vertex_set(m: int, p: int, ordering: Ordering = "renormalized") -> VertexSet:
    if m < 0 or p < 0 or m + p < 1:
        raise ParameterError("need m, p >= 0 and m + p >= 1")
    if ordering == "renormalized":
        inner = [(1, 1), (1, -1), (2, 1), (2, -1)]
    elif ordering == "lexicographic":
        inner = [(1, 1), (2, 1), (1, -1), (2, -1)]
    else:
        raise ParameterError(f"unknown ordering {ordering!r}")
    verts: list[Vertex] = []
    for i in range(1, m + 1):
        verts.extend((i, r, d) for r, d in inner)
    verts.extend((m + 1, r, 1) for r in range(1, p + 1))
    verts.extend((m + 1, r, -1) for r in range(1, p + 1))
    return VertexSet(m, p, ordering, tuple(verts))


@dataclass(frozen=True)
class Pairing:
    """Perfect matching as (alpha, beta) pairs with alpha before beta."""

    vertex_set: VertexSet
    edges: tuple[tuple[Vertex, Vertex], ...]
    cls: PairingClass

    def to_line(self) -> str:
        return " ".join(f"{_fmt(a)}-{_fmt(b)}" for a, b in self.edges)


def _fmt(v: Vertex) -> str:
    return f"({v[0]},{v[1]},{v[2]:+d})"


def perfect_matchings(
    n: int, allowed: Callable[[int, int], bool]
) -> Iterator[tuple[tuple[int, int], ...]]:
    """All perfect matchings of 0..n-1 with allowed(a, b), a < b.

    Backtracks on the smallest free index, so output order is deterministic.
    """
    if n % 2:
        return
    free = [True] * n
    stack: list[tuple[int, int]] = []

    def rec(start: int):
        a = start
        while a < n and not free[a]:
            a += 1
        if a == n:
            yield tuple(stack)
            return
        free[a] = False
        for b in range(a + 1, n):
            if free[b] and allowed(a, b):
                free[b] = False
                stack.append((a, b))
                yield from rec(a + 1)
                stack.pop()
                free[b] = True
        free[a] = True

    yield from rec(0)


def admissible(alpha: Vertex, beta: Vertex, m: int, cls: PairingClass) -> bool:
    if alpha[2] * beta[2] != -1:
        return False
    if cls == "P" and alpha[0] == beta[0] and alpha[0] <= m and alpha[1] == beta[1]:
        return False
    return True


def enumerate_pairings(
    vs: VertexSet, cls: PairingClass = "P", max_m: int = DEFAULT_MAX_M
) -> list[Pairing]:
    if cls not in ("P", "N"):
        raise ParameterError(f"unknown pairing class {cls!r}")
    if vs.m > max_m:
        raise ParameterError(f"m = {vs.m} exceeds enumeration cap {max_m}")
    V = vs.vertices
    ok = lambda a, b: admissible(V[a], V[b], vs.m, cls)  # noqa: E731
    return [
        Pairing(vs, tuple((V[a], V[b]) for a, b in match), cls)
        for match in perfect_matchings(len(V), ok)
    ]


def count_pairings(m: int, p: int, cls: PairingClass, ordering: Ordering = "renormalized") -> int:
    vs = build_vertex_set(m, p, ordering)
    V = vs.vertices
    return sum(1 for _ in perfect_matchings(len(V), lambda a, b: admissible(V[a], V[b], m, cls)))


# --- collapsed graph ---------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    a: tuple  # earlier vertex class
    b: tuple  # later (or equal, for loops) vertex class
    sigma: int

    @property
    def is_loop(self) -> bool:
        return self.a == self.b


@dataclass(frozen=True)
class Path:
    """Connected component, edges listed in traversal order."""

    edges: tuple[Edge, ...]
    walk: tuple[tuple, ...]  # visited vertices a_0, a_1, ..., a_q
    closed: bool


@dataclass(frozen=True)
class CollapsedGraph:
    m: int
    p: int
    variant: Variant
    vertices: tuple[tuple, ...]  # in inherited order
    edges: tuple[Edge, ...]
    paths: tuple[Path, ...]

    def order(self, a) -> int:
        return self.vertices.index(a)

    def degree(self, a) -> int:
        return sum((e.a == a) + (e.b == a) for e in self.edges)

    @property
    def v2(self) -> tuple:
        return tuple(v for v in self.vertices if v[0] <= self.m)

    @property
    def v1(self) -> tuple:
        return tuple(v for v in self.vertices if v[0] > self.m)


def vertex_class(alpha: Vertex, m: int, variant: Variant = "standard") -> tuple:
    i, r, delta = alpha
    if i <= m or variant == "identity":
        return (i, r)
    return (i, r, delta)


def collapse(pairing: Pairing, variant: Variant = "standard") -> CollapsedGraph:
    vs = pairing.vertex_set
    m = vs.m
    classes: list[tuple] = []
    for v in vs.vertices:
        c = vertex_class(v, m, variant)
        if c not in classes:
            classes.append(c)
    pos = {c: k for k, c in enumerate(classes)}
    edges = []
    for alpha, beta in pairing.edges:
        ca, cb = vertex_class(alpha, m, variant), vertex_class(beta, m, variant)
        # same-i classes interleave in the lexicographic order; their relative
        # orientation is irrelevant (equal times, symmetric kernels)
        if pos[ca] > pos[cb] and ca[0] != cb[0]:
            raise InvariantViolation("class order disagrees with vertex order")
        edges.append(Edge(ca, cb, beta[2]))
    g_edges = tuple(edges)
    return CollapsedGraph(m, vs.p, variant, tuple(classes), g_edges, _components(classes, g_edges, m))


def _components(classes: Sequence[tuple], edges: Sequence[Edge], m: int) -> tuple[Path, ...]:
    unused = list(range(len(edges)))
    incident: dict[tuple, list[int]] = {c: [] for c in classes}
    for k, e in enumerate(edges):
        incident[e.a].append(k)
        incident[e.b].append(k)
    paths = []

    def other(e: Edge, v):
        return e.b if e.a == v else e.a

    # open components first: start from a degree-1 vertex
    starts = [c for c in classes if len(incident[c]) == 1]
    for s in starts:
        if not any(k in unused for k in incident[s]):
            continue
        walk, seq, v = [s], [], s
        while True:
            nxt = [k for k in incident[v] if k in unused]
            if not nxt:
                break
            k = nxt[0]
            unused.remove(k)
            seq.append(edges[k])
            v = other(edges[k], v)
            walk.append(v)
        paths.append(Path(tuple(seq), tuple(walk), False))
    while unused:
        k0 = unused[0]
        start = edges[k0].a
        walk, seq, v = [start], [], start
        while True:
            nxt = [k for k in incident[v] if k in unused]
            if not nxt:
                break
            k = nxt[0]
            unused.remove(k)
            seq.append(edges[k])
            v = other(edges[k], v)
            walk.append(v)
        if walk[-1] != walk[0]:
            raise InvariantViolation("component neither path nor cycle")
        paths.append(Path(tuple(seq), tuple(walk), True))
    return tuple(paths)


def vertex_times(graph: CollapsedGraph, t: Sequence[float]) -> dict:
    """s_a = t_i for a vertex class with first index i; t_{m+1} = 0."""
    if len(t) != graph.m:
        raise ParameterError(f"need {graph.m} times, got {len(t)}")
    for k in range(1, len(t)):
        if not t[k] < t[k - 1]:
            raise ParameterError("times must be strictly decreasing")
    if graph.m and not (t[-1] >= 0.0 and t[0] <= 1.0):
        raise ParameterError("times must lie in [0, 1]")
    full = list(t) + [0.0]
    return {a: full[a[0] - 1] for a in graph.vertices}


def path_time_sum(graph: CollapsedGraph, path: Path, t: Sequence[float]) -> float:
    """Sum of the signed time arguments sigma(e)(s_a - s_b), a < b, along a path.

    Zero whenever the colours obey the closed-path rule; for open paths the
    endpoint times are both t_{m+1} = 0.
    """
    s = vertex_times(graph, t)
    total = 0.0
    for e in path.edges:
        if e.is_loop:
            continue
        lo, hi = (e.a, e.b) if graph.order(e.a) < graph.order(e.b) else (e.b, e.a)
        total += e.sigma * (s[lo] - s[hi])
    return total


def colour_rule_holds(graph: CollapsedGraph, path: Path) -> bool:
    """Colours along a closed path are fixed by the first edge and directions."""
    if not path.closed or any(e.is_loop for e in path.edges):
        return True
    w = path.walk
    # rotate so that the walk starts going upward (a_1 < a_2 convention)
    ref = None
    for e, a, b in zip(path.edges, w[:-1], w[1:]):
        o = 1 if graph.order(a) < graph.order(b) else -1
        if ref is None:
            ref = e.sigma * o
        elif e.sigma * o != ref:
            return False
    return True


def dump_pairings(pairings: Sequence[Pairing]) -> str:
    return "\n".join(p.to_line() for p in pairings) + ("\n" if pairings else "")


def parse_pairing_line(line: str) -> list[tuple[Vertex, Vertex]]:
    out = []
    for tok in line.split():
        left, right = tok.split(")-(")
        a = tuple(int(x) for x in left.strip("(").split(","))
        b = tuple(int(x) for x in right.strip(")").split(","))
        out.append((a, b))
    return out
