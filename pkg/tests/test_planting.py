from dataclasses import replace

import numpy as np
import pytest

from fpp.errors import PlantingError
from fpp.gadgets.barrel import BarrelSpec
from fpp.gadgets.goodvertex import scan_good_vertices
from fpp.gadgets.planting import (PlantRegistry, isometry, plant_and_verify_hole,
                                  planted_patch, window_times)
from fpp.growth import Ball
from fpp.topology import detect_holes
from fpp.weights import Edge, WeightDistribution, WeightField

import oracles as O

SPEC = BarrelSpec.build(100, 0.35, 1.0, 10.0)   # m = (35, 12, 4), L = 1
T0 = 150.0


@pytest.fixture(scope="module")
def planted_setup():
    out = []
    for seed in range(3):
        b = Ball(WeightField(WeightDistribution.exponential(), seed)).grow_to(T0)
        certs = scan_good_vertices(b, 2.0, SPEC.n, limit=2)
        out += [(b, c) for c in certs]
    assert len(out) >= 3
    return out


def core_vertices(cert, L):
    return [O.add(cert.x, v) for v in O.l1_ball_vertices(L, len(cert.x))]


def test_isometry_maps_tip_to_path_start(planted_setup):
    for _, c in planted_setup:
        Q = isometry(c)
        assert abs(round(np.linalg.det(Q))) == 1
        assert np.all(np.abs(Q).sum(axis=0) == 1)
        tip = np.array([-c.n, 0]) @ Q.T + np.array(c.x)
        assert tuple(tip) == tuple(c.path[0])


def test_patch_stays_in_planted_region(planted_setup):
    b, c = planted_setup[0]
    p = planted_patch(c, SPEC, "max-extremal").to_dict()
    path = set(map(tuple, c.path))
    for e in p:
        u, v = e.endpoints()
        for w in (u, v):
            assert sum(abs(a - z) for a, z in zip(w, c.x)) <= c.n or w in path
            assert not b.contains(w)
    b.with_overrides(planted_patch(c, SPEC))  # accepted: nothing touches B(t)


def test_cropped_is_sound_against_fresh_regrowth(planted_setup):
    for b, c in planted_setup[:3]:
        for mode in ("max-extremal", "min-extremal"):
            rep = plant_and_verify_hole(b, c, SPEC, mode, method="cropped")
            field = b.field.with_overrides(planted_patch(c, SPEC, mode))
            fresh = Ball(field)
            for s, formed, vol in rep.checks:
                fresh.grow_to(s)
                holes = detect_holes(fresh)
                core = set(core_vertices(c, SPEC.L))
                hit = [h for h in holes.holes if core <= h.vertex_set()]
                if formed:
                    assert len(hit) == 1 and hit[0].volume >= vol
                    assert vol >= SPEC.volume_bound


def test_regrow_matches_fresh_single_pass(planted_setup):
    b, c = planted_setup[0]
    rep = plant_and_verify_hole(b.copy(), c, SPEC, "min-extremal", method="regrow")
    fresh = Ball(b.field.with_overrides(planted_patch(c, SPEC, "min-extremal")))
    core = set(core_vertices(c, SPEC.L))
    for s, formed, vol in rep.checks:
        holes = detect_holes(fresh.grow_to(s))
        hit = [h for h in holes.holes if core <= h.vertex_set()]
        assert formed == (len(hit) == 1)
        if formed:
            assert vol == hit[0].volume


def test_window_is_all_or_nothing_from_the_start(planted_setup):
    for b, c in planted_setup:
        for mode in ("max-extremal", "min-extremal", "sampled"):
            rep = plant_and_verify_hole(b, c, SPEC, mode, method="cropped", seed=4)
            assert [s for s, _, _ in rep.checks] == window_times(T0, SPEC)
            if rep.checks[0][1]:
                assert rep.hole_formed
            if rep.hole_formed:
                assert rep.min_volume >= SPEC.volume_bound


def test_rejections(planted_setup):
    b, c = planted_setup[0]
    other = BarrelSpec.build(200, 0.3, 1.0, 5.0)
    with pytest.raises(PlantingError):
        plant_and_verify_hole(b, c, other)
    # e_x above b' breaks the certificate
    heavy = Ball(b.field.with_overrides({c.e_x: c.b_prime + 1.0})).grow_to(0)
    heavy_ball = b.copy()
    heavy_ball.field = heavy.field
    with pytest.raises(PlantingError):
        plant_and_verify_hole(heavy_ball, c, SPEC)
    with pytest.raises(PlantingError):
        plant_and_verify_hole(b, replace(c, x=O.add(c.x, (1, 0))), SPEC)
    with pytest.raises(ValueError):
        plant_and_verify_hole(b, c, SPEC, method="guess")


def test_registry_rejects_overlapping_boxes(planted_setup):
    b, c = planted_setup[0]
    reg = PlantRegistry()
    plant_and_verify_hole(b, c, SPEC, method="cropped", registry=reg)
    with pytest.raises(PlantingError):
        plant_and_verify_hole(b, c, SPEC, method="cropped", registry=reg)
    moved = replace(c, x=O.add(c.x, (2 * c.n, 0)))
    with pytest.raises(PlantingError):
        reg.check(moved)
    far = replace(c, x=O.add(c.x, (10 * c.n, 0)))
    reg.check(far)


def test_window_times():
    s = BarrelSpec.build(1000, 0.1, 1, 2, 1e-4)
    w = window_times(150.0, s)
    assert w[0] == pytest.approx(150 + s.kappa)
    assert w[-1] - w[0] == pytest.approx(0.1)
