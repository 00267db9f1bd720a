"""Diagnostics: geodesic straightness, Kesten path bound, fluctuation size."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _kernels as K
from ..growth import DEFAULT_MAX_VERTICES, Ball
from ..weights import Edge, WeightDistribution, WeightField, row_major_strides
from .shape import estimate_shape, probe_point

# --------------------------------------------------------------- straightness


def lattice_ring(R: float, d: int = 2) -> list[tuple]:
    """Lattice points z with |‖z‖_2 - R| < 1/2, lexicographic."""
    m = int(math.ceil(R + 1))
    g = np.indices((2 * m + 1,) * d).reshape(d, -1).T - m
    r = np.linalg.norm(g, axis=1)
    return [tuple(int(c) for c in v) for v in g[np.abs(r - R) < 0.5]]


def angle_between(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if len(u) == 2:
        return abs(math.atan2(u[0] * v[1] - u[1] * v[0], float(u @ v)))
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(max(-1.0, min(1.0, c)))


@dataclass
class StraightnessReport:
    p: float
    radii: list
    max_angle: dict = field(default_factory=dict)   # r -> max over samples
    mean_angle: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)     # r -> list of (x, max angle, #out)
    slope: float = math.nan

    def as_records(self) -> list[dict]:
        return [{"r": r, "max_angle": self.max_angle[r], "mean_angle": self.mean_angle[r],
                 "reference": r ** (-self.p), "samples": len(self.samples[r])}
                for r in self.radii]


def straightness_probe(ball: Ball, radii: Sequence[float], p: float,
                       samples: int = 8, seed: int = 0) -> StraightnessReport:
    """Largest angle between x and the ring points z at 2|x| with z in out(0, x).

    Each x is found by walking the geodesic to a random ring point z0 at
    radius 2r and taking its first vertex with |x|_2 >= r; z0 itself is then
    in out(0, x), so the out-set is never empty.
    """
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    rng = np.random.default_rng(seed)
    rep = StraightnessReport(float(p), [float(r) for r in radii])
    for r in rep.radii:
        ring = lattice_ring(2 * r, ball.d)
        picks = rng.choice(len(ring), size=min(samples, len(ring)), replace=False)
        rows = []
        for i in sorted(picks):
            z0 = ring[i]
            ball.passage_time(z0)
            geo = ball.extract_geodesic(z0)
            x = next(v for v in geo.vertices if np.linalg.norm(v) >= r)
            out = ball.out_set(x, ring)
            ang = max(angle_between(x, z) for z in out)
            rows.append((x, ang, len(out)))
        rep.samples[r] = rows
        angs = [a for _, a, _ in rows]
        rep.max_angle[r] = float(max(angs))
        rep.mean_angle[r] = float(np.mean(angs))
    xs = np.log(rep.radii)
    ys = np.array([rep.max_angle[r] for r in rep.radii])
    if len(xs) >= 2 and np.all(ys > 0):
        rep.slope = float(np.polyfit(xs, np.log(ys), 1)[0])
    return rep


# ------------------------------------------------------------------- Kesten


@dataclass
class KestenReport:
    n: int
    mode: str
    ratios: np.ndarray
    seeds: list

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())

    @property
    def p01(self) -> float:
        return float(np.percentile(self.ratios, 1))

    def summary(self) -> dict:
        return {"n": self.n, "mode": self.mode, "samples": len(self.ratios),
                "min_ratio": self.min_ratio, "p01_ratio": self.p01,
                "mean_ratio": float(self.ratios.mean())}


EXACT_MAX_N = 12


def min_ratio_exact(field: WeightField, n: int) -> float:
    """min T(gamma)/n over edge-self-avoiding n-edge paths through the origin."""
    d = field.d
    lo = np.full(d, -(n + 1), dtype=np.int64)
    shape = np.full(d, 2 * n + 3, dtype=np.int64)
    w = field.box_weights(lo, shape)
    strides = row_major_strides(shape)
    origin = int((-lo) @ strides)
    # overrides may undercut the distribution's floor, so bound by the box itself
    best = K.min_path_through_origin(w, strides, origin, n, float(w.min()))
    return float(best) / n


def min_ratio_greedy(field: WeightField, n: int) -> float:
    """Cheapest greedy two-ended extension from the origin (an upper witness)."""
    d = field.d
    ends = [(0,) * d, (0,) * d]
    used = set()
    total = 0.0
    for _ in range(n):
        best = None
        for i, v in enumerate(ends):
            for k in range(d):
                for s in (1, -1):
                    u = list(v)
                    u[k] += s
                    e = Edge.between(v, tuple(u))
                    if e in used:
                        continue
                    w = field.weight(e)
                    if best is None or w < best[0]:
                        best = (w, i, e, tuple(u))
        w, i, e, u = best
        used.add(e)
        ends[i] = u
        total += w
    return total / n


def kesten_probe(distribution: WeightDistribution, n: int, samples: int, *,
                 mode: str = "exact", d: int = 2, base_seed: int = 0,
                 seeds: Sequence[int] | None = None) -> KestenReport:
    if mode == "exact" and n > EXACT_MAX_N:
        raise ValueError(f"exact mode enumerates all paths; n must be <= {EXACT_MAX_N}")
    if mode not in ("exact", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if n < 1:
        raise ValueError("n must be positive")
    seeds = list(seeds) if seeds is not None else [base_seed + i for i in range(samples)]
    fn = min_ratio_exact if mode == "exact" else min_ratio_greedy
    ratios = np.array([fn(WeightField(distribution, s, d), n) for s in seeds])
    return KestenReport(n, mode, ratios, seeds)


# ------------------------------------------------------------- concentration


@dataclass
class ConcentrationReport:
    direction: tuple
    radii: list
    g_hat: float
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    exceedance: dict = field(default_factory=dict)  # (C, r) -> fraction
    chi: float | None = None
    degenerate: bool = False
    samples: dict = field(default_factory=dict)

    def exceedance_curve(self, C: float) -> list[float]:
        return [self.exceedance[(C, r)] for r in self.radii]

    def as_records(self) -> list[dict]:
        out = []
        for r in self.radii:
            row = {"r": r, "mean": self.mean[r], "std": self.std[r]}
            for (C, rr), f in sorted(self.exceedance.items()):
                if rr == r:
                    row[f"exceed_C{C:g}"] = f
            out.append(row)
        return out


def concentration_samples(field: WeightField, direction, radii: Sequence[float],
                          max_vertices: int = DEFAULT_MAX_VERTICES) -> np.ndarray:
    ball = Ball(field, max_vertices=max_vertices)
    return np.array([ball.passage_time(probe_point(direction, r)[0]) for r in radii])


def concentration_from_samples(direction, radii: Sequence[float], T: np.ndarray,
                               g_hat: float, C_grid: Sequence[float]) -> ConcentrationReport:
    """T has shape (replicas, radii); g_hat is the norm value on the unit vector."""
    radii = [float(r) for r in radii]
    rep = ConcentrationReport(tuple(direction), radii, float(g_hat))
    for j, r in enumerate(radii):
        _, length = probe_point(direction, r)
        col = T[:, j]
        rep.samples[r] = col
        rep.mean[r] = float(col.mean())
        rep.std[r] = float(col.std(ddof=1)) if len(col) > 1 else 0.0
        g = g_hat * length
        scale = math.sqrt(max(g * math.log(g), 0.0)) if g > 0 else 0.0
        for C in C_grid:
            rep.exceedance[(float(C), r)] = float(np.mean(np.abs(col - g) > C * scale))
    stds = np.array([rep.std[r] for r in radii])
    if np.any(stds <= 0):
        rep.degenerate = True
    elif len(radii) >= 2:
        rep.chi = float(np.polyfit(np.log(radii), np.log(stds), 1)[0])
    return rep


def concentration_probe(distribution: WeightDistribution, direction, radii: Sequence[float],
                        replicas: int, *, g_hat: float | None = None,
                        C_grid: Sequence[float] = (1, 2, 3, 4), d: int = 2,
                        base_seed: int = 0, seeds: Sequence[int] | None = None,
                        max_vertices: int = DEFAULT_MAX_VERTICES) -> ConcentrationReport:
    """Spread of T(0, x_r) across replicas; ghat defaults to a fresh shape estimate
    at the largest radius on an independent seed block."""
    radii = sorted(float(r) for r in radii)
    seeds = list(seeds) if seeds is not None else [base_seed + i for i in range(replicas)]
    if g_hat is None:
        other = [s + 1_000_003 for s in seeds]
        est = estimate_shape(distribution, [direction], radii[-1], len(other), d=d,
                             radii=[radii[-1]], seeds=other, max_vertices=max_vertices)
        g_hat = est.mean(direction)
    T = np.stack([concentration_samples(WeightField(distribution, s, d), direction, radii,
                                        max_vertices) for s in seeds])
    return concentration_from_samples(direction, radii, T, g_hat, C_grid)
