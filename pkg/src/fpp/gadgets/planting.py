"""Plant a barrel at a good vertex and check that it traps a hole.

The barrel configuration is carried into x + Lambda(n) by a signed axis
permutation taking -n e1 to the bridge's first vertex, the bridge edges get
cheap weights, and then one of two methods decides whether x + Lambda(L) sits
in a bounded component of B(s)^c for s across the window [t + kappa, t + kappa +
eps^4 n]:

``regrow``
    regrow the whole ball under the planted field and label its complement.
``cropped``
    a sandwich that never leaves the planted box. Any frontier time plus a
    path inside the planted region bounds T(0, y) from above; any path into
    x + Lambda(n-1) crosses the sphere |w - x|_1 = n at a vertex outside B(t),
    so t plus the sphere-to-z time inside x + Lambda(n) bounds T(0, z) from
    below. If the upper bound puts the whole image of R-hat inside B(s) while
    the lower bound keeps x + Lambda(L) outside, the hole is certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import CertificateError, PlantingError
from ..growth import Ball, box_dijkstra
from ..topology import _label
from ..weights import EdgePatch, row_major_strides
from .barrel import BarrelGeometry, BarrelSpec, en_box_weights
from .goodvertex import GoodVertexCertificate, validate_certificate

METHODS = ("regrow", "cropped")


def isometry(cert: GoodVertexCertificate) -> np.ndarray:
    """Signed permutation Q (d x d) with x + Q(-n e1) = path[0].

    e1 goes to -s e_j; the other axes fill the remaining slots in increasing
    order with positive sign.
    """
    j, s = cert.entry
    d = len(cert.x)
    Q = np.zeros((d, d), dtype=np.int64)
    Q[j, 0] = -s
    rest = [k for k in range(d) if k != j]
    for col, k in enumerate(rest, start=1):
        Q[k, col] = 1
    return Q


def planted_patch(cert: GoodVertexCertificate, spec: BarrelSpec, mode="min-extremal",
                  seed=None) -> EdgePatch:
    """Overrides for the image of the barrel plus cheap bridge edges."""
    geom, w = en_box_weights(spec, mode, seed)
    Q = isometry(cert)
    x = np.asarray(cert.x, dtype=np.int64)
    axes, flats = np.nonzero(np.isfinite(w))
    tails = np.stack(np.unravel_index(flats, tuple(geom.shape)), axis=-1) + geom.lo
    heads = tails.copy()
    heads[np.arange(len(axes)), axes] += 1
    t_img = tails @ Q.T + x
    h_img = heads @ Q.T + x
    # canonical base is the endpoint with the smaller coordinate along the image axis
    img_axis = np.argmax(np.abs(Q[:, axes]), axis=0)
    flip = Q[img_axis, axes] < 0
    bases = np.where(flip[:, None], h_img, t_img)
    parts_b = [bases]
    parts_a = [img_axis]
    parts_w = [w[axes, flats]]

    path = np.asarray(cert.path, dtype=np.int64)
    if len(path) > 1:
        lo_w, hi_w = spec.a - spec.delta, spec.a
        if mode == "max-extremal":
            pw = np.full(len(path) - 1, hi_w)
        elif mode == "sampled":
            rng = np.random.default_rng(None if seed is None else seed + 1)
            pw = lo_w + (hi_w - lo_w) * rng.random(len(path) - 1)
        elif mode == "min-extremal":
            pw = np.full(len(path) - 1, lo_w)
        else:
            pw = np.full(len(path) - 1, lo_w + float(mode) * (hi_w - lo_w))
        step = path[1:] - path[:-1]
        ax = np.argmax(np.abs(step), axis=1)
        base = np.where((step.sum(axis=1) > 0)[:, None], path[:-1], path[1:])
        parts_b.append(base)
        parts_a.append(ax)
        parts_w.append(pw)
    return EdgePatch(np.concatenate(parts_b), np.concatenate(parts_a),
                     np.concatenate(parts_w))


def plant_box(cert: GoodVertexCertificate) -> tuple[np.ndarray, np.ndarray]:
    r = cert.n + math.isqrt(cert.n) + 1
    x = np.asarray(cert.x, dtype=np.int64)
    return x - r, x + r


class PlantRegistry:
    """Boxes already planted on one ball; new plants must avoid all of them."""

    def __init__(self):
        self.boxes: list[tuple[np.ndarray, np.ndarray]] = []

    def check(self, cert: GoodVertexCertificate) -> None:
        lo, hi = plant_box(cert)
        for olo, ohi in self.boxes:
            if np.all(lo <= ohi) and np.all(olo <= hi):
                raise PlantingError(f"plant box around {cert.x} overlaps an earlier plant")

    def add(self, cert: GoodVertexCertificate) -> None:
        self.check(cert)
        self.boxes.append(plant_box(cert))


@dataclass
class PlantReport:
    x: tuple
    spec: BarrelSpec
    mode: object
    method: str
    t: float
    kappa: float
    window: tuple
    checks: list = field(default_factory=list)  # (s, formed, volume)
    upper_max: float = math.nan
    lower_min: float = math.nan

    @property
    def hole_formed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    @property
    def volume_bound(self) -> float:
        return self.spec.volume_bound

    @property
    def min_volume(self) -> int:
        return min((v for _, _, v in self.checks), default=0)

    def as_record(self) -> dict:
        return {"x": list(self.x), "method": self.method, "mode": str(self.mode),
                "t": self.t, "kappa": self.kappa, "window": list(self.window),
                "hole_formed": self.hole_formed,
                "checks": [{"s": s, "formed": ok, "volume": v} for s, ok, v in self.checks],
                "upper_max": self.upper_max, "lower_min": self.lower_min,
                "volume_bound": self.volume_bound, **self.spec.as_record()}


def window_times(t: float, spec: BarrelSpec) -> list[float]:
    k, w = spec.kappa, spec.window_width
    return [t + k, t + k + w / 2, t + k + w]


def plant_and_verify_hole(ball: Ball, cert: GoodVertexCertificate, spec: BarrelSpec,
                          mode="min-extremal", *, method: str = "regrow",
                          registry: PlantRegistry | None = None,
                          seed=None) -> PlantReport:
    if spec.n != cert.n:
        raise PlantingError(f"spec.n={spec.n} but certificate n={cert.n}")
    if len(cert.x) != spec.d:
        raise PlantingError("certificate and spec differ in dimension")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    ok, why = spec.chain()
    if not ok:
        raise ValueError(f"scale chain fails: {why}")
    try:
        validate_certificate(ball, cert)
    except CertificateError as exc:
        raise PlantingError(f"certificate rejected: {exc}") from exc
    if registry is not None:
        registry.check(cert)

    patch = planted_patch(cert, spec, mode, seed)
    t = ball.horizon
    times = window_times(t, spec)
    rep = PlantReport(tuple(cert.x), spec, mode, method, t, spec.kappa,
                      (times[0], times[-1]))
    if method == "regrow":
        _regrow(ball, cert, spec, patch, times, rep)
    else:
        _cropped(ball, cert, spec, patch, times, rep)
    if registry is not None:
        registry.add(cert)
    return rep


def _regrow(ball, cert, spec, patch, times, rep):
    planted = ball.with_overrides(patch)
    x = np.asarray(cert.x)
    core = _l1_offsets(spec.L, spec.d) + x
    for s in times:
        planted.grow_to(s)
        S = planted.to_lattice_set()
        box = S.padded(1)
        labels, count, touches = _label(~box.mask)
        rel = core - box.lo
        if np.any(rel < 0) or np.any(rel >= box.mask.shape):
            rep.checks.append((s, False, 0))
            continue
        labs = labels[tuple(rel.T)]
        if np.any(labs < 0) or np.any(labs != labs[0]) or touches[labs[0]]:
            rep.checks.append((s, False, 0))
            continue
        rep.checks.append((s, True, int(np.count_nonzero(labels == labs[0]))))


def _l1_offsets(r: int, d: int) -> np.ndarray:
    g = np.indices((2 * r + 1,) * d).reshape(d, -1).T - r
    return g[np.abs(g).sum(axis=1) <= r]


def _cropped(ball, cert, spec, patch, times, rep):
    d, n = spec.d, spec.n
    x = np.asarray(cert.x, dtype=np.int64)
    path = np.asarray(cert.path, dtype=np.int64)
    pts = np.vstack([x - n, x + n, path])
    lo = pts.min(axis=0) - 2
    hi = pts.max(axis=0) + 2
    shape = hi - lo + 1
    strides = row_major_strides(shape)
    field = ball.field.with_overrides(patch)
    w = field.box_weights(lo, shape)
    grids = np.indices(tuple(shape)).reshape(d, -1).T + lo
    dist = np.abs(grids - x).sum(axis=1)
    lam = dist <= n
    region = lam.copy()
    region[(path - lo) @ strides] = True

    # upper bound: entry times from the ball's edge, then paths inside region
    B = ball.to_lattice_set().embedded(lo, shape).reshape(-1)
    btimes = np.full(B.size, np.inf)
    member_flat = np.flatnonzero(B)
    btimes[member_flat] = _times_lookup(ball, grids[member_flat])
    init = np.full(B.size, np.inf)
    ncells = B.size
    for k in range(d):
        s = int(strides[k])
        wk = w[k, : ncells - s]
        # tail in B, head in region
        cand = btimes[: ncells - s] + wk
        np.minimum.at(init, np.arange(s, ncells), np.where(region[s:], cand, np.inf))
        cand = btimes[s:] + wk
        np.minimum.at(init, np.arange(0, ncells - s), np.where(region[: ncells - s], cand, np.inf))
    src = np.flatnonzero(np.isfinite(init) & region)
    if src.size == 0:
        raise PlantingError("planted region has no edge into the ball")
    upper = box_dijkstra(w, shape, region, src, init[src])

    # lower bound: t plus time from the sphere inside x + Lambda(n)
    sphere = np.flatnonzero(dist == n)
    lower = ball.horizon + box_dijkstra(w, shape, lam, sphere, np.zeros(sphere.size))

    geom = BarrelGeometry(spec)
    Q = isometry(cert)
    rhat_img = geom.vertices(geom.rhat) @ Q.T + x
    interior_img = geom.vertices(geom.region & ~geom.rhat) @ Q.T + x
    core = _l1_offsets(spec.L, d) + x
    f_rhat = (rhat_img - lo) @ strides
    f_int = (interior_img - lo) @ strides
    f_core = (core - lo) @ strides
    rep.upper_max = float(upper[f_rhat].max())
    rep.lower_min = float(lower[f_core].min())

    # B(s) = {T <= s}, so staying outside needs a strict lower bound;
    # certified volume: component of {lower > s} inside the image of R minus R-hat
    int_mask = np.zeros(ncells, dtype=bool)
    int_mask[f_int] = True
    for s in times:
        formed = rep.upper_max <= s and rep.lower_min > s
        vol = 0
        if formed:
            keep = (int_mask & (lower > s)).reshape(tuple(shape))
            labels, _, _ = _label(keep)
            lab = labels.reshape(-1)[f_core[0]]
            vol = int(np.count_nonzero(labels == lab)) if lab >= 0 else 0
        rep.checks.append((s, bool(formed), vol))


def _times_lookup(ball, coords):
    rel = coords - ball.lo
    flat = rel @ ball.strides
    return ball.times[flat]
