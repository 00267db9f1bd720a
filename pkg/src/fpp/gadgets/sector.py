"""Thin annular sectors S_{x0} behind a far point x0 of the plane.

Euclidean mode uses
    J = (log r)^(C18 - 3) / r,   K = (log r)^C18 / r,   r = |x0|_2,
with membership |theta(v, x0)| <= J and 1 - K <= |v|_2 / r <= 1.

The g-norm mode swaps the Euclidean ratio for g(v)/g(x0), with
    K = 3 C35 sqrt(g log g) / g,   J = 64 K / (a c22),   g = g(x0).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..topology import HoleReport, detect_holes

NORM_MODES = ("euclidean", "g-norm")


@dataclass(frozen=True)
class SectorSpec:
    x0: tuple
    J: float
    K: float
    C18: float
    norm_mode: str = "euclidean"
    g: Callable | None = field(default=None, compare=False, repr=False)

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.x0))

    def _norm(self, v: np.ndarray) -> np.ndarray:
        if self.norm_mode == "euclidean":
            return np.linalg.norm(v, axis=-1)
        return np.asarray(self.g(v), dtype=np.float64)

    def angle(self, v) -> np.ndarray:
        """Signed angle from x0 to v (counterclockwise positive)."""
        v = np.asarray(v, dtype=np.float64)
        x = np.asarray(self.x0, dtype=np.float64)
        cross = x[0] * v[..., 1] - x[1] * v[..., 0]
        dot = v @ x
        return np.arctan2(cross, dot)

    def ratio(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        return self._norm(v) / self._norm(np.asarray(self.x0, dtype=np.float64))

    def contains_many(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64).reshape(-1, 2)
        th = np.abs(self.angle(v))
        rho = self.ratio(v)
        # the origin has no direction, so it is never in a sector
        nonzero = np.any(v != 0, axis=1)
        return nonzero & (th <= self.J) & (rho >= 1 - self.K) & (rho <= 1)

    def side(self, v) -> str | None:
        """None when v is inside; otherwise near/far/left/right."""
        v = np.asarray(v, dtype=np.float64)
        rho = float(self.ratio(v[None])[0])
        th = float(self.angle(v[None])[0])
        if rho > 1:
            return "far"
        if rho < 1 - self.K or not np.any(v != 0):
            return "near"
        if th > self.J:
            return "left"
        if th < -self.J:
            return "right"
        return None


def sector(x0, C18: float, norm_mode: str = "euclidean", *, g: Callable | None = None,
           C35: float = 1.0, a: float = 1.0, c22: float = 1.0) -> SectorSpec:
    x0 = tuple(int(c) for c in x0)
    if len(x0) != 2:
        raise ValueError("sectors are planar")
    r = math.hypot(*x0)
    if norm_mode == "euclidean":
        if not r > math.e:
            raise ValueError(f"|x0|_2 = {r:.3g} must exceed e")
        if not C18 > 3:
            raise ValueError("C18 must exceed 3")
        lr = math.log(r)
        return SectorSpec(x0, lr ** (C18 - 3) / r, lr**C18 / r, float(C18), norm_mode)
    if norm_mode == "g-norm":
        if g is None:
            raise ValueError("g-norm mode needs a norm callable")
        gx = float(g(np.asarray(x0, dtype=np.float64)))
        if not gx > math.e:
            raise ValueError(f"g(x0) = {gx:.3g} must exceed e")
        K = 3 * C35 * math.sqrt(gx * math.log(gx)) / gx
        return SectorSpec(x0, 64 * K / (a * c22), K, float(C18), norm_mode, g)
    raise ValueError(f"unknown norm mode {norm_mode!r}")


def sector_contains(spec: SectorSpec, v) -> bool:
    return bool(spec.contains_many(np.asarray(v))[0])


def _scan_box(spec: SectorSpec):
    r = spec.radius
    if spec.norm_mode == "euclidean":
        k = min(spec.K, 1.0)
        reach = r * (k + min(spec.J, math.pi)) + 2
        reach = min(reach, 2 * r + 2)
    else:
        reach = 2 * r + 2
    x0 = np.asarray(spec.x0)
    lo = np.floor(x0 - reach).astype(np.int64)
    hi = np.ceil(x0 + reach).astype(np.int64)
    # the sector never leaves the disc of radius r in euclidean mode
    lo = np.maximum(lo, -math.ceil(r) - 1) if spec.norm_mode == "euclidean" else lo
    hi = np.minimum(hi, math.ceil(r) + 1) if spec.norm_mode == "euclidean" else hi
    return lo, hi


def sector_volume(spec: SectorSpec) -> int:
    """Exact number of lattice points in S_{x0}."""
    lo, hi = _scan_box(spec)
    total = 0
    xs = np.arange(lo[1], hi[1] + 1)
    for row0 in range(lo[0], hi[0] + 1, 256):
        rows = np.arange(row0, min(row0 + 256, hi[0] + 1))
        pts = np.stack(np.meshgrid(rows, xs, indexing="ij"), axis=-1).reshape(-1, 2)
        total += int(np.count_nonzero(spec.contains_many(pts)))
    return total


@dataclass
class SectorReport:
    has_hole: bool
    contained: bool | None = None
    x0: tuple | None = None
    J: float = math.nan
    K: float = math.nan
    hole_volume: int = 0
    escapes: dict = field(default_factory=dict)
    note: str = ""

    @property
    def escape_sides(self) -> set:
        return {s for s, c in self.escapes.items() if c}

    def as_record(self) -> dict:
        return {"has_hole": self.has_hole, "contained": self.contained,
                "x0": list(self.x0) if self.x0 else None, "J": self.J, "K": self.K,
                "hole_volume": self.hole_volume, "escapes": dict(self.escapes),
                "note": self.note}


def largest_hole_sector_test(ball, C18: float, report: HoleReport | None = None,
                             **sector_kw) -> SectorReport:
    """Does the largest hole fit in the sector behind its outermost vertex?"""
    rep = report if report is not None else detect_holes(ball)
    C = rep.largest
    if C is None:
        return SectorReport(False, note="no holes")
    pts = C.vertices
    norms = np.einsum("ij,ij->i", pts, pts)
    # outermost vertex, lexicographically first on ties (vertices are sorted)
    x0 = tuple(int(c) for c in pts[int(np.argmax(norms))])
    try:
        spec = sector(x0, C18, **sector_kw)
    except ValueError as exc:
        return SectorReport(True, None, x0, hole_volume=C.volume, note=str(exc))
    inside = spec.contains_many(pts)
    esc = Counter(spec.side(v) for v in pts[~inside])
    escapes = {s: esc.get(s, 0) for s in ("near", "left", "right", "far")}
    return SectorReport(True, bool(inside.all()), x0, spec.J, spec.K, C.volume, escapes)
