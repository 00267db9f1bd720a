import math
from dataclasses import replace

import numpy as np
import pytest

from fpp.errors import CertificateError
from fpp.gadgets.goodvertex import (is_valid_certificate, scan_good_vertices,
                                    validate_certificate)
from fpp.growth import Ball
from fpp.lattice import LatticeSet, l1_ball
from fpp.weights import Edge, WeightDistribution, WeightField

import oracles as O


class SetBall:
    """A fixed vertex set posing as a grown ball."""

    def __init__(self, S, field):
        self.S = S if isinstance(S, LatticeSet) else LatticeSet.from_vertices(S, 2)
        self.field = field

    def to_lattice_set(self):
        return self.S


def l1(u, v):
    return sum(abs(a - b) for a, b in zip(u, v))


def recheck(members, field, cert, arr=None):
    """Good-vertex definition evaluated literally on Python sets."""
    x, n = tuple(cert.x), cert.n
    d = len(x)
    assert x not in members
    if arr is None:
        arr = np.array(sorted(members))
    assert np.abs(arr - np.array(x)).sum(axis=1).min() == n + 1                          # item 1 (both halves)
    path = [tuple(p) for p in cert.path]
    tips = {O.add(x, O.unit(d, j, s * n)) for j in range(d) for s in (1, -1)}
    assert path[0] in tips
    assert len(path) - 1 <= math.sqrt(n)                 # 2c
    for u, v in zip(path, path[1:]):
        assert l1(u, v) == 1
    for p in path:                                       # 2a
        assert l1(p, x) > n - 1 and p not in members
    a, b = cert.e_x.endpoints()                          # 2b
    assert path[-1] in (a, b)
    assert (b if path[-1] == a else a) in members
    assert field.weight(cert.e_x) <= cert.b_prime


def test_tiny_ball_at_large_n_only_yields_literal_certificates():
    # x = (-19, 0) is good for Lambda(2) at n = 16: its diamond misses the ball,
    # the tip (-3, 0) touches it, and the bridge has zero edges
    f = WeightField(WeightDistribution.exponential(), 0)
    S = l1_ball(2, 2)
    res = scan_good_vertices(SetBall(S, f), 10.0, 16)
    for c in res:
        recheck(S.vertex_set(), f, c)
    assert all(len(c.path) == 1 for c in res)
    assert scan_good_vertices(SetBall(S, f), 0.0, 16).count == 0


def test_solid_diamond_certificates_recheck():
    f = WeightField(WeightDistribution.uniform(0, 1), 4)
    S = l1_ball(100, 2)
    members = S.vertex_set()
    res = scan_good_vertices(SetBall(S, f), 1.0, 8)
    assert res.count > 10
    for c in res:
        recheck(members, f, c)
        validate_certificate(SetBall(S, f), c)
    pts = np.array([c.x for c in res])
    gaps = np.abs(pts[:, None, :] - pts[None, :, :]).sum(-1)
    assert np.all(gaps[~np.eye(len(pts), dtype=bool)] >= 32)


def test_exponential_balls_have_good_vertices():
    hits = 0
    for seed in range(20):
        b = Ball(WeightField(WeightDistribution.exponential(), seed)).grow_to(150)
        res = scan_good_vertices(b, 5.0, 8, limit=3)
        hits += res.count > 0
        arr = b.vertices()
        members = set(map(tuple, arr.tolist()))
        for c in res:
            recheck(members, b.field, c, arr)
    assert hits >= 19


def test_zero_length_bridges_recheck():
    b = Ball(WeightField(WeightDistribution.exponential(), 3)).grow_to(80)
    res = scan_good_vertices(b, 0.5, 9, max_path_edges=0)
    members = {tuple(int(c) for c in v) for v in b.vertices()}
    for c in res:
        assert len(c.path) == 1
        recheck(members, b.field, c)


def test_limit_and_bad_arguments():
    b = Ball(WeightField(WeightDistribution.exponential(), 3)).grow_to(80)
    assert scan_good_vertices(b, 5.0, 8, limit=2).count <= 2
    with pytest.raises(ValueError):
        scan_good_vertices(b, 5.0, 8, max_path_edges=3)
    with pytest.raises(ValueError):
        scan_good_vertices(b, 5.0, 0)


def test_tampered_certificates_rejected():
    b = Ball(WeightField(WeightDistribution.exponential(), 1)).grow_to(100)
    c = scan_good_vertices(b, 5.0, 8, limit=1)[0]
    assert is_valid_certificate(b, c)
    w = b.field.weight(c.e_x)
    bad = [
        replace(c, b_prime=w / 2) if w > 0 else None,
        replace(c, x=O.add(c.x, (1, 0))),
        replace(c, path=c.path + (O.add(c.path[-1], (0, 1)),) * 3),
        replace(c, path=()),
        replace(c, e_x=Edge((10**6, 0), 0)),
    ]
    for cert in bad:
        if cert is None:
            continue
        with pytest.raises(CertificateError):
            validate_certificate(b, cert)
    # a heavier e_x invalidates the certificate for the patched ball
    heavy = b.field.with_overrides({c.e_x: c.b_prime + 1})
    assert not is_valid_certificate(SetBall(b.to_lattice_set(), heavy), c)
