"""Complement structure of a finite vertex set: holes, boundaries, coarse covers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import ndimage

from . import _kernels as K
from .lattice import LatticeSet


@dataclass
class Hole:
    vertices: np.ndarray  # (volume, d), lexicographic
    volume: int
    radial_diameter: float
    lateral_diameter: float
    bbox: tuple  # (lo, hi), inclusive

    def vertex_set(self) -> set:
        return {tuple(int(c) for c in v) for v in self.vertices}


@dataclass
class HoleReport:
    holes: list = field(default_factory=list)
    N: int = 0
    M: int = 0
    edge_boundary_size: int = 0
    horizon: float = 0.0
    # complement cells of the inflated box that belong to the unbounded part
    outside_volume: int = 0
    box_volume: int = 0
    ball_volume: int = 0

    @property
    def largest(self) -> Hole | None:
        if not self.holes:
            return None
        # first hole of maximal volume, holes being in label order
        return max(self.holes, key=lambda h: h.volume)

    def signature(self) -> list:
        return sorted(tuple(sorted(h.vertex_set())) for h in self.holes)


HOLE_CSV_HEADER = ["row_type", "seed", "t", "hole_id", "volume",
                   "radial_diameter", "lateral_diameter", "N", "M", "edge_boundary_size"]


def report_rows(report: HoleReport, seed) -> list[list]:
    rows = []
    for i, h in enumerate(report.holes):
        rows.append(["hole", seed, report.horizon, i, h.volume,
                     f"{h.radial_diameter:.6g}", f"{h.lateral_diameter:.6g}", "", "", ""])
    rows.append(["summary", seed, report.horizon, "", "", "", "",
                 report.N, report.M, report.edge_boundary_size])
    return rows


def _as_lattice_set(obj, d=None) -> LatticeSet:
    if isinstance(obj, LatticeSet):
        return obj
    to_ls = getattr(obj, "to_lattice_set", None)
    if to_ls is not None:
        return to_ls()
    verts = [tuple(int(c) for c in v) for v in obj]
    return LatticeSet.from_vertices(verts, d)


def _label(mask: np.ndarray):
    shape = np.array(mask.shape, dtype=np.int64)
    labels, count, touches = K.label_components(mask.reshape(-1), shape)
    return labels.reshape(mask.shape), int(count), touches


def _angular_spread(pts: np.ndarray) -> float:
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0):
        return math.pi
    units = pts / norms[:, None]
    if pts.shape[1] == 2:
        mean = units.sum(axis=0)
        if np.linalg.norm(mean) < 1e-12:
            return math.pi
        base = math.atan2(mean[1], mean[0])
        ang = np.arctan2(units[:, 1], units[:, 0]) - base
        ang = (ang + math.pi) % (2 * math.pi) - math.pi
        return float(min(ang.max() - ang.min(), math.pi))
    best = 1.0
    for i in range(0, len(units), 1024):
        best = min(best, float((units[i:i + 1024] @ units.T).min()))
    return float(math.acos(max(-1.0, min(1.0, best))))


def hole_geometry(pts: np.ndarray) -> tuple[float, float]:
    """(radial, lateral) diameters of a vertex array."""
    r = np.linalg.norm(pts.astype(np.float64), axis=1)
    radial = float(r.max() - r.min())
    lateral = _angular_spread(pts.astype(np.float64)) * float(r.mean())
    return radial, lateral


def edge_boundary(ball) -> int:
    """Number of edges with exactly one endpoint in the set."""
    s = _as_lattice_set(ball)
    m = np.pad(s.mask, 1)
    return int(sum(np.count_nonzero(np.diff(m.astype(np.int8), axis=k))
                   for k in range(m.ndim)))


def detect_holes(ball, horizon: float | None = None) -> HoleReport:
    """Bounded complement components of a finite set (a Ball or LatticeSet)."""
    s = _as_lattice_set(ball)
    if horizon is None:
        horizon = float(getattr(ball, "horizon", 0.0))
    box = s.padded(1)
    comp = ~box.mask
    labels, count, touches = _label(comp)
    rep = HoleReport(horizon=horizon, edge_boundary_size=edge_boundary(s),
                     box_volume=int(box.mask.size), ball_volume=int(s.mask.sum()))
    flat = labels.reshape(-1)
    bounded = ~touches
    rep.outside_volume = int(np.isin(flat, np.flatnonzero(touches)).sum()) if count else 0
    if not bounded.any():
        return rep
    cells = np.flatnonzero((flat >= 0) & bounded[np.maximum(flat, 0)])
    lab = flat[cells]
    order = np.argsort(lab, kind="stable")
    cells, lab = cells[order], lab[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
    ends = np.r_[starts[1:], len(lab)]
    coords = np.stack(np.unravel_index(cells, box.mask.shape), axis=-1) + box.lo
    for a, b in zip(starts, ends):
        pts = coords[a:b]
        radial, lateral = hole_geometry(pts)
        rep.holes.append(Hole(pts, int(b - a), radial, lateral,
                              (tuple(int(c) for c in pts.min(axis=0)),
                               tuple(int(c) for c in pts.max(axis=0)))))
    rep.N = len(rep.holes)
    rep.M = max(h.volume for h in rep.holes)
    return rep


def is_connected(S) -> bool:
    s = _as_lattice_set(S)
    if not s.mask.any():
        return False
    _, count, _ = _label(s.mask)
    return count == 1


def exterior_star_boundary(S, d: int | None = None) -> set:
    """Vertices of the unbounded component of S^c that are l-inf adjacent to S."""
    s = _as_lattice_set(S, d)
    if not s.mask.any():
        raise ValueError("S is empty")
    if not is_connected(s):
        raise ValueError("S is not lattice-connected")
    box = s.padded(2)
    labels, count, touches = _label(~box.mask)
    outer = np.isin(labels, np.flatnonzero(touches))
    near = ndimage.binary_dilation(box.mask, structure=np.ones((3,) * box.d, bool))
    hit = near & outer
    return {tuple(int(c) for c in v) for v in np.argwhere(hit) + box.lo}


def box_cover(S: Iterable, n: int) -> set:
    """Coarse cells z whose box 4nz + [-2n, 2n-1]^d meets S."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(S, LatticeSet):
        pts = S.vertices()
    else:
        pts = np.asarray([tuple(v) for v in S], dtype=np.int64)
    if pts.size == 0:
        return set()
    z = np.floor_divide(pts + 2 * n, 4 * n)
    return {tuple(int(c) for c in v) for v in np.unique(z, axis=0)}
