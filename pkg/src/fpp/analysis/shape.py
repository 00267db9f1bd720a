"""Limit-shape estimation from passage times along fixed directions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.spatial import ConvexHull

from ..growth import DEFAULT_MAX_VERTICES, Ball
from ..weights import WeightDistribution, WeightField


def probe_point(direction, r: float) -> tuple[tuple, float]:
    """Lattice point probed at scale r and the Euclidean length it stands for.

    Integer directions v are probed at k v with k = max(1, floor(r / |v|)),
    so every probed point lies exactly on the ray. Other directions z use
    floor(r z / |z|) and its own Euclidean norm.
    """
    v = np.asarray(direction)
    if np.issubdtype(v.dtype, np.integer) or np.all(np.equal(np.mod(v, 1), 0)):
        v = v.astype(np.int64)
        norm = float(np.linalg.norm(v))
        if norm == 0:
            raise ValueError("zero direction")
        k = max(1, int(math.floor(r / norm)))
        return tuple(int(c) for c in k * v), norm * k
    z = v.astype(np.float64) / np.linalg.norm(v)
    x = np.floor(r * z).astype(np.int64)
    return tuple(int(c) for c in x), float(np.linalg.norm(x))


def _ghat_value(T: float, x: tuple, direction) -> float:
    v = np.asarray(direction)
    if np.all(np.equal(np.mod(v, 1), 0)):
        v = v.astype(np.int64)
        k = int(np.abs(np.asarray(x)).sum() // np.abs(v).sum())
        # T / k first keeps deterministic l1 cases exact
        return (T / k) / float(np.linalg.norm(v))
    return T / float(np.linalg.norm(x))


def direction_key(direction) -> tuple:
    v = np.asarray(direction)
    if np.all(np.equal(np.mod(v, 1), 0)):
        return tuple(int(c) for c in v)
    return tuple(float(c) for c in v)


def unit(direction) -> np.ndarray:
    v = np.asarray(direction, dtype=np.float64)
    return v / np.linalg.norm(v)


def replica_samples(field: WeightField, directions: Sequence, radii: Sequence[float],
                    max_vertices: int = DEFAULT_MAX_VERTICES) -> np.ndarray:
    """ghat samples for one configuration, shape (len(radii), len(directions))."""
    ball = Ball(field, max_vertices=max_vertices)
    out = np.empty((len(radii), len(directions)))
    for i, r in enumerate(radii):
        for j, z in enumerate(directions):
            x, _ = probe_point(z, r)
            out[i, j] = _ghat_value(ball.passage_time(x), x, z)
    return out


@dataclass
class ShapeEstimate:
    directions: list
    g_hat: dict            # key -> (mean, se) at the largest radius
    radii_used: list
    replicas: int
    per_radius: dict = field(default_factory=dict)  # (key, r) -> (mean, se)
    samples: np.ndarray | None = None               # (replicas, radii, directions)
    in_radius: float = math.nan
    out_radius: float = math.nan
    _hull_eq: np.ndarray | None = None

    def mean(self, direction) -> float:
        return self.g_hat[direction_key(direction)][0]

    def se(self, direction) -> float:
        return self.g_hat[direction_key(direction)][1]

    def ci(self, direction, level: float = 0.95) -> tuple[float, float]:
        m, se = self.g_hat[direction_key(direction)]
        q = stats.t.ppf(0.5 + level / 2, max(self.replicas - 1, 1))
        return m - q * se, m + q * se

    def gauge(self, x) -> np.ndarray:
        """Convex interpolation of ghat: max of the supporting linear bounds."""
        if self._hull_eq is None:
            raise ValueError("no hull; need at least d+1 independent directions")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        A = self._hull_eq[:, :-1]
        c = -self._hull_eq[:, -1]
        return np.max((x @ A.T) / c, axis=1)

    def as_records(self) -> list[dict]:
        out = []
        for (key, r), (m, se) in sorted(self.per_radius.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            out.append({"direction": list(key), "r": r, "g_hat": m, "se": se,
                        "replicas": self.replicas})
        return out


def _symmetries(d: int):
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            yield perm, np.array(signs)


def aggregate_shape(directions: Sequence, radii: Sequence[float], samples: np.ndarray) -> ShapeEstimate:
    samples = np.asarray(samples, dtype=np.float64)
    reps = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros_like(mean)
    keys = [direction_key(z) for z in directions]
    per_radius = {}
    for i, r in enumerate(radii):
        for j, k in enumerate(keys):
            per_radius[(k, float(r))] = (float(mean[i, j]), float(se[i, j]))
    last = len(radii) - 1
    g_hat = {k: (float(mean[last, j]), float(se[last, j])) for j, k in enumerate(keys)}
    est = ShapeEstimate(list(keys), g_hat, [float(r) for r in radii], reps, per_radius, samples)

    d = len(keys[0])
    pts = []
    for j, z in enumerate(directions):
        g = mean[last, j]
        if not g > 0:
            continue
        p = unit(z) / g
        for perm, signs in _symmetries(d):
            pts.append(p[list(perm)] * signs)
    pts = np.unique(np.round(np.asarray(pts), 12), axis=0) if pts else np.zeros((0, d))
    if len(pts) > d:
        try:
            hull = ConvexHull(pts)
        except Exception:  # degenerate point sets
            hull = None
        if hull is not None:
            est._hull_eq = hull.equations
            est.in_radius = float(np.min(-hull.equations[:, -1]))
            est.out_radius = float(np.max(np.linalg.norm(pts[hull.vertices], axis=1)))
    return est


def estimate_shape(distribution: WeightDistribution, directions: Iterable, r_max: float,
                   replicas: int, *, d: int = 2, radii: Sequence[float] | None = None,
                   base_seed: int = 0, seeds: Sequence[int] | None = None,
                   max_vertices: int = DEFAULT_MAX_VERTICES) -> ShapeEstimate:
    """Mean of T(0, x_r(z)) / |x_r(z)| over replicas, per direction and scale."""
    directions = list(directions)
    radii = sorted(set(float(r) for r in (radii or [r_max / 4, r_max / 2, r_max])))
    if radii[-1] != float(r_max):
        radii.append(float(r_max))
    seeds = list(seeds) if seeds is not None else [base_seed + i for i in range(replicas)]
    if len(seeds) != replicas:
        raise ValueError("seed list length differs from replicas")
    samples = np.stack([replica_samples(WeightField(distribution, s, d), directions, radii,
                                        max_vertices) for s in seeds])
    return aggregate_shape(directions, radii, samples)
