"""Dense boolean masks over integer boxes, plus a few lattice helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LatticeSet:
    """Finite vertex set stored as a mask over the box ``lo + [0, mask.shape)``."""

    lo: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.lo.shape != (self.mask.ndim,):
            raise ValueError("lo does not match mask dimension")

    @property
    def d(self) -> int:
        return self.mask.ndim

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.array(self.mask.shape) - 1

    def __len__(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_vertices(cls, vertices, d: int | None = None, pad: int = 0) -> "LatticeSet":
        pts = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                         dtype=np.int64)
        if pts.size == 0:
            if d is None:
                raise ValueError("empty vertex set needs an explicit dimension")
            return cls(np.zeros(d, np.int64), np.zeros((1,) * d, bool))
        pts = pts.reshape(len(pts), -1)
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        mask = np.zeros(tuple(hi - lo + 1), dtype=bool)
        mask[tuple((pts - lo).T)] = True
        return cls(lo, mask)

    def vertices(self) -> np.ndarray:
        """Member coordinates in lexicographic order."""
        return np.argwhere(self.mask) + self.lo

    def vertex_set(self) -> set:
        return {tuple(int(c) for c in v) for v in self.vertices()}

    def contains(self, v) -> bool:
        rel = np.asarray(v, dtype=np.int64) - self.lo
        if np.any(rel < 0) or np.any(rel >= self.mask.shape):
            return False
        return bool(self.mask[tuple(rel)])

    def padded(self, pad: int) -> "LatticeSet":
        return LatticeSet(self.lo - pad, np.pad(self.mask, pad))

    def embedded(self, lo, shape) -> np.ndarray:
        """Mask re-expressed over the box lo + [0, shape); cells outside stay False."""
        lo = np.asarray(lo, dtype=np.int64)
        out = np.zeros(tuple(int(s) for s in shape), dtype=bool)
        src_lo = np.maximum(self.lo, lo)
        src_hi = np.minimum(self.hi + 1, lo + np.asarray(shape))
        if np.any(src_hi <= src_lo):
            return out
        dst = tuple(slice(a - l, b - l) for a, b, l in zip(src_lo, src_hi, lo))
        src = tuple(slice(a - l, b - l) for a, b, l in zip(src_lo, src_hi, self.lo))
        out[dst] = self.mask[src]
        return out


def l1_ball(n: int, d: int, center=None) -> LatticeSet:
    """Lambda(n) = {x : ||x||_1 <= n}, optionally translated."""
    c = np.zeros(d, np.int64) if center is None else np.asarray(center, np.int64)
    axes = np.ogrid[tuple(slice(-n, n + 1) for _ in range(d))]
    dist = sum(np.abs(a) for a in axes)
    return LatticeSet(c - n, dist <= n)


def l1_norm(v) -> int:
    return int(np.abs(np.asarray(v)).sum())


def neighbours(v):
    v = tuple(v)
    for k in range(len(v)):
        for s in (1, -1):
            w = list(v)
            w[k] += s
            yield tuple(w)
