import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpp.errors import ResourceLimitError
from fpp.growth import (Ball, box_dijkstra, extract_geodesic, grow_to, out_set,
                        passage_time, restricted_passage_time)
from fpp.lattice import l1_ball
from fpp.weights import Edge, WeightDistribution, WeightField

import oracles as O

ONE = WeightDistribution.constant(1.0)
EXP = WeightDistribution.exponential(1.0)


def ball_at(dist, seed, t, **kw):
    return Ball(WeightField(dist, seed), **kw).grow_to(t)


# ------------------------------------------------------------------ examples

def test_unit_weights_t2_is_diamond():
    b = ball_at(ONE, 0, 2)
    got = {tuple(v) for v in b.vertices()}
    assert got == {v for v in O.l1_ball_vertices(2, 2)}
    assert b.size == 13


def test_unit_weights_t0_is_origin():
    b = ball_at(ONE, 0, 0)
    assert b.size == 1 and b.contains((0, 0))


@pytest.mark.parametrize("c", [0.25, 1.0, 3.0])
def test_constant_weights_give_scaled_l1(c):
    b = Ball(WeightField(WeightDistribution.constant(c), 5))
    for x in [(0, 0), (3, 0), (-2, 5), (7, -7)]:
        assert passage_time(b, x) == pytest.approx(c * (abs(x[0]) + abs(x[1])), rel=0, abs=1e-12)


def test_unit_weights_in_3d():
    b = Ball(WeightField(ONE, 0, d=3)).grow_to(2)
    assert b.size == len(O.l1_ball_vertices(2, 3))


def test_uniform_7x7_patch_against_bellman_ford():
    f = WeightField(WeightDistribution.uniform(0.5, 1.5), 31)
    b = Ball(f).grow_to(3)
    verts = O.box_vertices((-7, -7), (7, 7))
    ref = O.bellman_ford(f, (0, 0), verts)
    want = {v: t for v, t in ref.items() if t <= 3}
    assert b.as_dict() == want


def test_passage_time_5x5_all_targets_floyd_warshall(rng):
    f, lo, hi = O.random_patch_field(rng, size=5)
    verts = O.box_vertices(lo, hi)
    idx, D = O.fraction_all_pairs(f, verts)
    b = Ball(f)
    for v in verts:
        assert passage_time(b, v) == float(D[idx[(0, 0)]][idx[v]])


def test_source_time_zero_and_other_source():
    f = WeightField(EXP, 4)
    assert Ball(f).passage_time((0, 0)) == 0.0
    b = Ball(f, source=(5, -3))
    assert b.passage_time((5, -3)) == 0.0
    assert b.contains((5, -3))


def test_geodesic_examples():
    b = ball_at(ONE, 0, 3)
    g = extract_geodesic(b, (0, 0))
    assert g.vertices == [(0, 0)] and g.edges == [] and g.total_time == 0
    g = extract_geodesic(b, (2, 0))
    assert g.vertices == [(0, 0), (1, 0), (2, 0)] and g.total_time == 2
    g = b.extract_geodesic((1, 1))
    assert len(g.edges) == 2 and g.total_time == 2
    assert g == b.extract_geodesic((1, 1))  # tie-break is fixed
    with pytest.raises(ValueError):
        b.extract_geodesic((50, 0))


def test_out_set_examples():
    b = ball_at(ONE, 0, 5)
    probe = [(2, 0), (0, 2), (-1, 0)]
    assert out_set(b, (0, 0), probe) == set(probe)
    assert out_set(b, (1, 0), [(2, 0)]) == {(2, 0)}
    assert b.out_set((1, 0), [(0, 2), (1, 0)]) == {(1, 0)}


# ------------------------------------------------------------------ oracles

@given(st.integers(0, 2**32), st.integers(3, 10), st.floats(0, 3))
def test_patch_ball_matches_bellman_ford(seed, size, t):
    rng = np.random.default_rng(seed)
    f, lo, hi = O.random_patch_field(rng, size=size)
    b = grow_to(Ball(f), t)
    ref = O.bellman_ford(f, (0, 0), O.box_vertices(lo, hi))
    assert b.as_dict() == {v: x for v, x in ref.items() if x <= t}
    for v in O.box_vertices(lo, hi):
        assert b.passage_time(v) == ref[v]


@given(st.integers(0, 2**32))
def test_out_set_matches_all_pairs(seed):
    rng = np.random.default_rng(seed)
    f, lo, hi = O.random_patch_field(rng, size=9)
    verts = O.box_vertices(lo, hi)
    idx, D = O.fraction_all_pairs(f, verts)
    s = idx[(0, 0)]
    b = Ball(f)
    for x in [verts[i] for i in rng.choice(len(verts), 4, replace=False)]:
        want = {z for z in verts if D[s][idx[z]] == D[s][idx[x]] + D[idx[x]][idx[z]]}
        assert b.out_set(x, verts) == want


@given(st.integers(0, 2**32))
def test_geodesic_partial_sums_exact(seed):
    rng = np.random.default_rng(seed)
    f, lo, hi = O.random_patch_field(rng, size=6)
    b = Ball(f).grow_to(100.0)
    for v in O.box_vertices(lo, hi):
        g = b.extract_geodesic(v)
        assert g.vertices[0] == (0, 0) and g.vertices[-1] == v
        acc = 0.0
        for u, e in zip(g.vertices[1:], g.edges):
            acc += f.weight(e)
            assert acc == b.time(u)
        assert acc == g.total_time == b.time(v)


def test_geodesic_partial_sums_exponential():
    b = ball_at(EXP, 8, 60)
    coords, times = b.time_table()
    pick = np.random.default_rng(0).choice(len(times), 40, replace=False)
    for i in pick:
        v = tuple(int(c) for c in coords[i])
        g = b.extract_geodesic(v)
        acc = 0.0
        for u, e in zip(g.vertices[1:], g.edges):
            acc += b.field.weight(e)
            assert acc == b.time(u)


# ------------------------------------------------------------------ invariants

@given(st.integers(0, 10**6), st.floats(0, 15), st.floats(0, 15))
def test_nesting(seed, t1, t2):
    t1, t2 = sorted((t1, t2))
    f = WeightField(EXP, seed)
    small = Ball(f).grow_to(t1).as_dict()
    big = Ball(f).grow_to(t2).as_dict()
    assert set(small) <= set(big)
    assert all(big[v] == small[v] for v in small)


def test_resumed_growth_equals_one_pass():
    f = WeightField(EXP, 21)
    a = Ball(f)
    for t in (5, 10, 17.5, 30):
        a.grow_to(t)
    b = Ball(f).grow_to(30)
    ca, ta = a.time_table()
    cb, tb = b.time_table()
    assert np.array_equal(ca, cb) and np.array_equal(ta, tb)


def test_cached_queries_do_not_change_membership():
    f = WeightField(EXP, 22)
    a = Ball(f).grow_to(10)
    before = a.as_dict()
    a.passage_time((40, 0))
    assert a.as_dict() == before
    a.grow_to(25)
    assert a.as_dict() == Ball(f).grow_to(25).as_dict()


@given(st.integers(0, 10**6))
def test_triangle_inequality(seed):
    f = WeightField(EXP, seed)
    b = Ball(f).grow_to(12)
    coords, _ = b.time_table()
    rng = np.random.default_rng(seed)
    for _ in range(5):
        x, y = (tuple(int(c) for c in coords[i]) for i in rng.integers(0, len(coords), 2))
        txy = Ball(f, source=x).passage_time(y)
        assert b.time(y) <= b.time(x) + txy + 1e-12


def test_box_growth_crosses_many_enlargements():
    b = ball_at(EXP, 3, 150)
    assert b.size > 10_000
    ref = ball_at(EXP, 3, 150, half_width=200)
    assert b.as_dict() == ref.as_dict()


def test_resource_limit_and_bad_horizons():
    with pytest.raises(ResourceLimitError):
        ball_at(EXP, 0, 50, max_vertices=100)
    b = ball_at(EXP, 0, 5)
    with pytest.raises(ValueError):
        b.grow_to(4)
    with pytest.raises(ValueError):
        b.grow_to(math.nan)
    with pytest.raises(ResourceLimitError):
        b.grow_to(math.inf)


def test_copy_is_independent():
    a = ball_at(EXP, 9, 10)
    c = a.copy()
    c.grow_to(20)
    assert a.horizon == 10 and c.horizon == 20
    assert a.as_dict() == ball_at(EXP, 9, 10).as_dict()


def test_with_overrides_rejects_touching_ball():
    a = ball_at(EXP, 9, 10)
    with pytest.raises(ValueError):
        a.with_overrides({Edge((0, 0), 0): 5.0})


def test_frontier_times_are_outside():
    b = ball_at(EXP, 1, 8)
    fr = b.frontier_times()
    assert fr and all(t > 8 for t in fr.values())
    assert all(not b.contains(v) for v in fr)


# ------------------------------------------------------------------ restricted

def test_restricted_examples():
    f = WeightField(EXP, 2)
    assert restricted_passage_time(f, [(3, 3)], (3, 3), (3, 3)) == 0.0
    assert math.isinf(restricted_passage_time(f, [(0, 0), (2, 0)], (0, 0), (2, 0)))
    with pytest.raises(ValueError):
        restricted_passage_time(f, [(0, 0)], (0, 0), (1, 0))


@given(st.integers(0, 2**32))
def test_restricted_on_l1_ball_matches_induced_bellman_ford(seed):
    rng = np.random.default_rng(seed)
    f, _, _ = O.random_patch_field(rng, size=8)
    S = O.l1_ball_vertices(3, 2)
    assert len(S) == 25
    x, y = (S[i] for i in rng.integers(0, 25, 2))
    ref = O.bellman_ford(f, x, S)
    assert restricted_passage_time(f, l1_ball(3, 2), x, y) == ref[y]
    assert restricted_passage_time(f, S, x, y) == ref[y]


def test_box_dijkstra_rejects_frontier_region():
    w = np.ones((2, 9))
    with pytest.raises(ValueError):
        box_dijkstra(w, (3, 3), np.ones(9, bool), np.array([4]), np.array([0.0]))
