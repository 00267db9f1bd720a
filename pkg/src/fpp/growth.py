"""First-passage times by frontier expansion.

A :class:`Ball` keeps a dense box around the settled region. Every cell holds
its tentative or final time and its settlement rank; the frontier is an
indexed binary heap ordered by (time, flat index). Because flat indices are
row-major, ties settle in lexicographic vertex order, and the order survives
box enlargement (the re-indexing map is monotone).

Vertices may be settled past the horizon when a query needs them
(``passage_time``, ``out_set``); they are cached, not members of B(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels as K
from .errors import ResourceLimitError
from .lattice import LatticeSet
from .weights import Edge, EdgePatch, WeightField, row_major_strides

DEFAULT_MAX_VERTICES = 50_000_000
DEFAULT_MAX_BOX_CELLS = 120_000_000


@dataclass(frozen=True)
class Geodesic:
    vertices: list
    edges: list
    total_time: float

    def __len__(self):
        return len(self.edges)


def _as_vertex(v, d) -> tuple:
    v = tuple(int(c) for c in v)
    if len(v) != d:
        raise ValueError(f"vertex {v} is not in dimension {d}")
    return v


class Ball:
    """B(t) grown from ``source`` under ``field``; resumable in t."""

    def __init__(self, field: WeightField, source=None, *,
                 max_vertices: int = DEFAULT_MAX_VERTICES,
                 max_box_cells: int = DEFAULT_MAX_BOX_CELLS,
                 half_width: int = 8):
        self.field = field
        self.d = field.d
        self.source = _as_vertex(source if source is not None else (0,) * self.d, self.d)
        self.max_vertices = int(max_vertices)
        self.max_box_cells = int(max_box_cells)
        self.horizon = 0.0
        self._alloc(np.asarray(self.source) - half_width,
                    np.full(self.d, 2 * half_width + 1))
        s = self._flat(self.source)
        self.times[s] = 0.0
        K.heap_push_or_decrease(self.heap, self.pos, self.times, self.state, s)
        self._settle(0.0)

    # ---------------------------------------------------------------- storage

    def _alloc(self, lo, shape):
        self.lo = np.asarray(lo, dtype=np.int64)
        self.shape = np.asarray(shape, dtype=np.int64)
        ncells = int(np.prod(self.shape))
        if ncells > self.max_box_cells:
            raise ResourceLimitError(
                f"box of {ncells} cells exceeds max_box_cells={self.max_box_cells}")
        self.strides = row_major_strides(self.shape)
        self.times = np.full(ncells, np.inf)
        self.rank = np.full(ncells, -1, dtype=np.int64)
        self.weights = self.field.box_weights(self.lo, self.shape)
        self.border = np.empty(ncells, dtype=np.bool_)
        K.border_mask(self.shape, self.border)
        self.heap = np.empty(ncells, dtype=np.int64)
        self.pos = np.full(ncells, -1, dtype=np.int64)
        self.state = np.zeros(2, dtype=np.int64)

    def _flat(self, v) -> int:
        rel = np.asarray(v, dtype=np.int64) - self.lo
        return int(rel @ self.strides)

    def _inside(self, v, margin=1) -> bool:
        rel = np.asarray(v, dtype=np.int64) - self.lo
        return bool(np.all(rel >= margin) and np.all(rel < self.shape - margin))

    def _coords(self, flat) -> np.ndarray:
        flat = np.asarray(flat, dtype=np.int64)
        return np.stack(np.unravel_index(flat, tuple(self.shape)), axis=-1) + self.lo

    def _enlarge(self, need_lo=None, need_hi=None):
        half = self.shape // 2
        grow = np.maximum(half // 2, 8)
        lo = self.lo - grow
        hi = self.lo + self.shape - 1 + grow
        if need_lo is not None:
            lo = np.minimum(lo, np.asarray(need_lo) - 2)
            hi = np.maximum(hi, np.asarray(need_hi) + 2)
        old = (self.lo, self.shape, self.strides, self.times, self.rank,
               self.heap, self.state)
        o_lo, o_shape, o_strides, o_times, o_rank, o_heap, o_state = old
        self._alloc(lo, hi - lo + 1)
        ncells_old = int(np.prod(o_shape))
        idx = np.unravel_index(np.arange(ncells_old), tuple(o_shape))
        remap = sum((idx[k] + (o_lo[k] - self.lo[k])) * self.strides[k]
                    for k in range(self.d)).astype(np.int64)
        self.times[remap] = o_times
        self.rank[remap] = o_rank
        size = int(o_state[0])
        self.heap[:size] = remap[o_heap[:size]]
        self.pos[self.heap[:size]] = np.arange(size)
        self.state[:] = o_state

    # ---------------------------------------------------------------- growth

    def _settle(self, limit: float, target: int = -1) -> int:
        while True:
            status = K.dijkstra_run(self.times, self.rank, self.weights, self.strides,
                                    self.border, self.heap, self.pos, self.state,
                                    float(limit), target, self.max_vertices)
            if status == K.STATUS_BORDER:
                tgt = None if target < 0 else self._coords(target)
                self._enlarge()
                if tgt is not None:
                    target = self._flat(tgt)
                continue
            if status == K.STATUS_CAP:
                raise ResourceLimitError(
                    f"growth would settle more than max_vertices={self.max_vertices}")
            return status

    def grow_to(self, t: float) -> "Ball":
        t = float(t)
        if math.isnan(t):
            raise ValueError("t is NaN")
        if t < self.horizon:
            raise ValueError(f"cannot shrink: t={t} < horizon={self.horizon}")
        if math.isinf(t):
            raise ResourceLimitError("infinite horizon")
        self._settle(t)
        self.horizon = t
        return self

    def _ensure_box(self, vertices):
        pts = np.asarray(vertices, dtype=np.int64).reshape(-1, self.d)
        if len(pts) == 0:
            return
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if np.all(lo - self.lo >= 1) and np.all(self.lo + self.shape - 1 - hi >= 1):
            return
        self._enlarge(lo, hi)

    def _settle_vertex(self, v) -> float:
        self._ensure_box([v])
        f = self._flat(v)
        if self.rank[f] < 0:
            self._settle(np.inf, f)
            f = self._flat(v)
        return float(self.times[f])

    def passage_time(self, x) -> float:
        x = _as_vertex(x, self.d)
        t = self._settle_vertex(x)
        # settle every tie so cached state stays a prefix in (time, index) order
        self._settle(t)
        return t

    # ---------------------------------------------------------------- queries

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.member_mask()))

    def member_mask(self) -> np.ndarray:
        return (self.rank >= 0) & (self.times <= self.horizon)

    def contains(self, v) -> bool:
        v = _as_vertex(v, self.d)
        if not self._inside(v, 0):
            return False
        f = self._flat(v)
        return bool(self.rank[f] >= 0 and self.times[f] <= self.horizon)

    def time(self, v):
        """T(source, v) if v is settled (member or cached), else None."""
        v = _as_vertex(v, self.d)
        if not self._inside(v, 0):
            return None
        f = self._flat(v)
        return float(self.times[f]) if self.rank[f] >= 0 else None

    def vertices(self) -> np.ndarray:
        """Members of B(horizon) in lexicographic order."""
        return self._coords(np.flatnonzero(self.member_mask()))

    def time_table(self, include_cached: bool = False):
        """(coords, times) in settlement order."""
        sel = self.rank >= 0 if include_cached else self.member_mask()
        flats = np.flatnonzero(sel)
        order = np.argsort(self.rank[flats], kind="stable")
        flats = flats[order]
        return self._coords(flats), self.times[flats].copy()

    def as_dict(self) -> dict:
        coords, times = self.time_table()
        return {tuple(int(c) for c in v): float(t) for v, t in zip(coords, times)}

    def to_lattice_set(self) -> LatticeSet:
        mask = self.member_mask().reshape(tuple(self.shape))
        nz = np.argwhere(mask)
        lo, hi = nz.min(axis=0), nz.max(axis=0)
        sl = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
        return LatticeSet(self.lo + lo, mask[sl].copy())

    def frontier_times(self) -> dict:
        """Tentative times of unsettled cells adjacent to the settled set."""
        flats = np.flatnonzero((self.rank < 0) & np.isfinite(self.times))
        return {tuple(int(c) for c in v): float(t)
                for v, t in zip(self._coords(flats), self.times[flats])}

    def extract_geodesic(self, x) -> Geodesic:
        x = _as_vertex(x, self.d)
        if self.time(x) is None:
            raise ValueError(f"{x} is not settled")
        chain = K.backtrack(self.times, self.rank, self.weights, self.strides, self._flat(x))
        if len(chain) == 0:  # pragma: no cover - would mean corrupted state
            raise RuntimeError("no tight predecessor chain")
        verts = [tuple(int(c) for c in v) for v in self._coords(chain[::-1])]
        edges = [Edge.between(u, v) for u, v in zip(verts, verts[1:])]
        return Geodesic(verts, edges, float(self.times[chain[0]]))

    def out_set(self, x, probe: Iterable) -> set:
        """Probe vertices z with T(s,z) = T(s,x) + T(x,z), s the source.

        Such z are exactly the tight-edge descendants of x, which is checked
        structurally instead of by re-adding floating point times.
        """
        x = _as_vertex(x, self.d)
        probe = [_as_vertex(z, self.d) for z in probe]
        pts = [x] + probe
        self._ensure_box(pts)
        tmax = max(self._settle_vertex(z) for z in pts)
        self._settle(tmax)
        reach = K.tight_descendants(self.times, self.rank, self.weights, self.strides,
                                    self.border, self._flat(x))
        hit = np.zeros(self.times.shape[0], dtype=bool)
        hit[reach] = True
        return {z for z in probe if hit[self._flat(z)]}

    def with_overrides(self, patch) -> "Ball":
        """Same B(horizon) under a patched field; patched edges must avoid the ball."""
        new_field = self.field.with_overrides(patch)
        touched = EdgePatch.from_mapping(patch, self.d)
        if len(touched):
            heads = touched.bases.copy()
            heads[np.arange(len(touched)), touched.axes] += 1
            for pts in (touched.bases, heads):
                rel = pts - self.lo
                ok = np.all((rel >= 0) & (rel < self.shape), axis=1)
                flats = rel[ok] @ self.strides
                if np.any(self.member_mask()[flats]):
                    raise ValueError("override touches an edge incident to the ball")
        coords, times = self.time_table()
        return Ball.from_settled(new_field, self.source, coords, times, self.horizon,
                                 max_vertices=self.max_vertices,
                                 max_box_cells=self.max_box_cells)

    def copy(self) -> "Ball":
        other = object.__new__(Ball)
        other.__dict__.update(self.__dict__)
        for name in ("lo", "shape", "strides", "times", "rank", "weights",
                     "border", "heap", "pos", "state"):
            setattr(other, name, getattr(self, name).copy())
        return other

    @classmethod
    def from_settled(cls, field: WeightField, source, coords, times, horizon: float,
                     *, max_vertices: int = DEFAULT_MAX_VERTICES,
                     max_box_cells: int = DEFAULT_MAX_BOX_CELLS) -> "Ball":
        """Rebuild a ball from its settlement-ordered vertex/time table."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, field.d)
        times = np.asarray(times, dtype=np.float64)
        if len(coords) == 0 or len(coords) != len(times):
            raise ValueError("settled table is empty or ragged")
        ball = object.__new__(cls)
        ball.field = field
        ball.d = field.d
        ball.source = _as_vertex(source, field.d)
        ball.max_vertices = int(max_vertices)
        ball.max_box_cells = int(max_box_cells)
        ball.horizon = float(horizon)
        if tuple(coords[0]) != ball.source or times[0] != 0.0:
            raise ValueError("first settled vertex must be the source at time 0")
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        pad = max(8, int(0.25 * (hi - lo).max()))
        ball._alloc(lo - pad, hi - lo + 1 + 2 * pad)
        flats = (coords - ball.lo) @ ball.strides
        ball.times[flats] = times
        ball.rank[flats] = np.arange(len(flats))
        ball.state[1] = len(flats)
        K.frontier_from_settled(ball.times, ball.rank, ball.weights, ball.strides,
                                ball.border, ball.heap, ball.pos, ball.state)
        return ball


# ------------------------------------------------------------ module level API


def grow_to(ball: Ball, t: float) -> Ball:
    return ball.grow_to(t)


def passage_time(ball: Ball, x) -> float:
    return ball.passage_time(x)


def extract_geodesic(ball: Ball, x) -> Geodesic:
    return ball.extract_geodesic(x)


def out_set(ball: Ball, x, probe) -> set:
    return ball.out_set(x, probe)


def box_dijkstra(weights: np.ndarray, shape, allowed: np.ndarray,
                 sources: np.ndarray, init: np.ndarray, target: int = -1) -> np.ndarray:
    """Multi-source Dijkstra inside a box restricted to ``allowed`` cells.

    ``weights`` is the (d, ncells) forward-edge array. Cells on the box
    frontier must be disallowed. Returns the time array (inf = unreachable).
    """
    shape = np.asarray(shape, dtype=np.int64)
    ncells = int(np.prod(shape))
    strides = row_major_strides(shape)
    allowed = np.asarray(allowed, dtype=bool).reshape(-1)
    w = weights.copy()
    # cut every edge with a disallowed endpoint
    w[:, ~allowed] = np.inf
    for k in range(len(shape)):
        s = int(strides[k])
        head_bad = np.ones(ncells, dtype=bool)
        head_bad[: ncells - s] = ~allowed[s:]
        w[k, head_bad] = np.inf
    border = np.empty(ncells, dtype=np.bool_)
    K.border_mask(shape, border)
    if np.any(border & allowed):
        raise ValueError("allowed region touches the box frontier")
    border[:] = False
    times = np.full(ncells, np.inf)
    rank = np.full(ncells, -1, dtype=np.int64)
    heap = np.empty(ncells, dtype=np.int64)
    pos = np.full(ncells, -1, dtype=np.int64)
    state = np.zeros(2, dtype=np.int64)
    sources = np.asarray(sources, dtype=np.int64).reshape(-1)
    init = np.broadcast_to(np.asarray(init, dtype=np.float64), sources.shape)
    for s, t0 in zip(sources, init):
        if not allowed[s]:
            raise ValueError("source outside the allowed region")
        if t0 < times[s]:
            times[s] = t0
            K.heap_push_or_decrease(heap, pos, times, state, int(s))
    K.dijkstra_run(times, rank, w, strides, border, heap, pos, state,
                   np.inf, int(target), ncells + 1)
    return times


def restricted_passage_time(field: WeightField, S, x, y) -> float:
    """Minimal passage time over paths whose vertices all lie in S."""
    d = field.d
    x = _as_vertex(x, d)
    y = _as_vertex(y, d)
    S = S if isinstance(S, LatticeSet) else LatticeSet.from_vertices(
        [_as_vertex(v, d) for v in S], d)
    if not S.contains(x):
        raise ValueError(f"{x} is not in S")
    if not S.contains(y):
        raise ValueError(f"{y} is not in S")
    box = S.padded(1)
    shape = np.array(box.mask.shape, dtype=np.int64)
    weights = field.box_weights(box.lo, shape)
    strides = row_major_strides(shape)
    fx = int((np.asarray(x) - box.lo) @ strides)
    fy = int((np.asarray(y) - box.lo) @ strides)
    times = box_dijkstra(weights, shape, box.mask, np.array([fx]), np.array([0.0]), fy)
    return float(times[fy])
