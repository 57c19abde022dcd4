import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbslab.errors import ParameterError
from gibbslab.pairing import (
    build_vertex_set,
    collapse,
    colour_rule_holds,
    count_pairings,
    dump_pairings,
    enumerate_pairings,
    parse_pairing_line,
    path_time_sum,
    perfect_matchings,
)

# counts from an independent brute force over all permutations (see test below)
KNOWN = {(1, 0): (1, 2), (0, 2): (2, 2), (1, 1): (3, 6), (2, 0): (9, 24), (2, 1): (53, 120)}


def _brute(m, p, cls, ordering):
    import itertools

    vs = build_vertex_set(m, p, ordering)
    plus = [v for v in vs.vertices if v[2] == 1]
    minus = [v for v in vs.vertices if v[2] == -1]
    n = 0
    for perm in itertools.permutations(minus):
        ok = all(not (cls == "P" and a[0] == b[0] and a[0] <= m and a[1] == b[1]) for a, b in zip(plus, perm))
        n += ok
    return n


@pytest.mark.parametrize("mp", sorted(KNOWN))
def test_counts(mp):
    m, p = mp
    nP, nN = KNOWN[mp]
    for ordering in ("renormalized", "lexicographic"):
        assert count_pairings(m, p, "P", ordering) == nP == _brute(m, p, "P", ordering)
        assert count_pairings(m, p, "N", ordering) == nN == _brute(m, p, "N", ordering)


def test_class_N_is_factorial():
    assert count_pairings(3, 1, "N") == math.factorial(7)


def test_vertex_set_order():
    vs = build_vertex_set(1, 1, "renormalized")
    assert vs.vertices == ((1, 1, 1), (1, 1, -1), (1, 2, 1), (1, 2, -1), (2, 1, 1), (2, 1, -1))
    lex = build_vertex_set(1, 1, "lexicographic")
    assert lex.vertices[:4] == ((1, 1, 1), (1, 2, 1), (1, 1, -1), (1, 2, -1))


def test_bad_vertex_set():
    with pytest.raises(ParameterError):
        build_vertex_set(0, 0)


def test_enumeration_cap():
    with pytest.raises(ParameterError):
        enumerate_pairings(build_vertex_set(3, 0), "P", max_m=2)


@given(st.integers(1, 8))
def test_perfect_matchings_count(k):
    n = 2 * k if k <= 5 else 10
    got = sum(1 for _ in perfect_matchings(n, lambda a, b: True))
    assert got == math.prod(range(n - 1, 0, -2))


@pytest.mark.parametrize("m,p", [(1, 1), (2, 0), (2, 1)])
def test_closed_paths_and_colour_rule(m, p):
    t = [0.8, 0.35][:m]
    for pi in enumerate_pairings(build_vertex_set(m, p), "P"):
        g = collapse(pi)
        assert sum(len(pa.edges) for pa in g.paths) == len(g.edges)
        for pa in g.paths:
            assert colour_rule_holds(g, pa)
            assert abs(path_time_sum(g, pa, t)) < 1e-15
        # every interaction vertex has degree 4 in total over its two classes
        for i in range(1, m + 1):
            assert g.degree((i, 1)) == 2 and g.degree((i, 2)) == 2


def test_class_P_has_no_loops():
    for pi in enumerate_pairings(build_vertex_set(2, 1), "P"):
        assert not any(e.is_loop for e in collapse(pi).edges)


def test_class_N_has_loops():
    loops = [any(e.is_loop for e in collapse(pi).edges) for pi in enumerate_pairings(build_vertex_set(1, 0, "lexicographic"), "N")]
    assert loops.count(True) == 1


def test_dump_round_trip():
    pis = enumerate_pairings(build_vertex_set(1, 1), "P")
    lines = dump_pairings(pis).strip().splitlines()
    assert len(lines) == 3
    for pi, line in zip(pis, lines):
        assert tuple(tuple(e) for e in parse_pairing_line(line)) == pi.edges
