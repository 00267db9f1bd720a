"""I.i.d. edge weights on the nearest-neighbour lattice, generated on demand.

Each edge weight is a pure function of (seed, canonical edge, distribution):
a splitmix64 hash of the zig-zag encoded base coordinates and the axis gives a
uniform in (0, 1), which is pushed through the law's inverse CDF. Nothing is
stored except explicit overrides, so the field is unbounded and replayable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from . import _kernels as K

Vertex = tuple  # tuple[int, ...]

# Bond percolation thresholds; 1/(2d-1) is a strict lower bound used past d = 6.
BOND_PC = {2: 0.5, 3: 0.2488, 4: 0.1601, 5: 0.1182, 6: 0.0942}

_MASK64 = (1 << 64) - 1


def bond_pc(d: int) -> float:
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    return BOND_PC.get(d, 1.0 / (2 * d - 1))


class Edge(NamedTuple):
    """Edge joining ``base`` and ``base + e_axis``."""

    base: tuple
    axis: int

    @classmethod
    def between(cls, u, v) -> "Edge":
        u = tuple(int(c) for c in u)
        v = tuple(int(c) for c in v)
        if len(u) != len(v):
            raise ValueError("endpoints differ in dimension")
        diff = [b - a for a, b in zip(u, v)]
        nz = [k for k, c in enumerate(diff) if c != 0]
        if len(nz) != 1 or abs(diff[nz[0]]) != 1:
            raise ValueError(f"{u} and {v} are not nearest neighbours")
        k = nz[0]
        return cls(u if diff[k] == 1 else v, k)

    def endpoints(self) -> tuple[tuple, tuple]:
        head = list(self.base)
        head[self.axis] += 1
        return self.base, tuple(head)


_KIND_CODES = {
    "constant": K.KIND_CONSTANT,
    "two-point": K.KIND_TWO_POINT,
    "uniform": K.KIND_UNIFORM,
    "exponential": K.KIND_EXPONENTIAL,
    "shifted-exponential": K.KIND_SHIFTED_EXPONENTIAL,
}


@dataclass(frozen=True)
class WeightDistribution:
    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if any(not math.isfinite(x) or x < 0 for x in p):
            raise ValueError(f"parameters must be finite and nonnegative: {p}")
        want = {"constant": 1, "two-point": 3, "uniform": 2,
                "exponential": 1, "shifted-exponential": 2}[self.kind]
        if len(p) != want:
            raise ValueError(f"{self.kind} takes {want} parameters, got {len(p)}")
        if self.kind == "two-point":
            a, b, pa = p
            if not a < b:
                raise ValueError("two-point law needs a < b")
            if not 0 < pa < 1:
                raise ValueError("two-point law needs 0 < p_a < 1")
        elif self.kind == "uniform" and not p[0] < p[1]:
            raise ValueError("uniform law needs lo < hi")
        elif self.kind == "exponential" and p[0] <= 0:
            raise ValueError("rate must be positive")
        elif self.kind == "shifted-exponential" and p[1] <= 0:
            raise ValueError("rate must be positive")

    @classmethod
    def constant(cls, c: float = 1.0):
        return cls("constant", (c,))

    @classmethod
    def two_point(cls, a: float, b: float, p_a: float):
        return cls("two-point", (a, b, p_a))

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0):
        return cls("uniform", (lo, hi))

    @classmethod
    def exponential(cls, rate: float = 1.0):
        return cls("exponential", (rate,))

    @classmethod
    def shifted_exponential(cls, shift: float, rate: float = 1.0):
        return cls("shifted-exponential", (shift, rate))

    @classmethod
    def from_dict(cls, spec: Mapping) -> "WeightDistribution":
        kind = spec["kind"]
        names = {
            "constant": ("c",),
            "two-point": ("a", "b", "p_a"),
            "uniform": ("lo", "hi"),
            "exponential": ("rate",),
            "shifted-exponential": ("shift", "rate"),
        }
        if kind not in names:
            raise ValueError(f"unknown distribution kind {kind!r}")
        extra = set(spec) - set(names[kind]) - {"kind"}
        if extra:
            raise ValueError(f"unexpected keys for {kind}: {sorted(extra)}")
        defaults = {"rate": 1.0}
        try:
            vals = tuple(spec.get(k, defaults.get(k)) for k in names[kind])
        except KeyError as exc:  # pragma: no cover
            raise ValueError(str(exc)) from None
        if any(v is None for v in vals):
            missing = [k for k, v in zip(names[kind], vals) if v is None]
            raise ValueError(f"{kind} is missing {missing}")
        return cls(kind, vals)

    def to_dict(self) -> dict:
        names = {
            "constant": ("c",),
            "two-point": ("a", "b", "p_a"),
            "uniform": ("lo", "hi"),
            "exponential": ("rate",),
            "shifted-exponential": ("shift", "rate"),
        }[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def param_array(self) -> np.ndarray:
        out = np.zeros(3, dtype=np.float64)
        out[: len(self.params)] = self.params
        return out

    @property
    def zero_mass(self) -> float:
        if self.kind == "constant":
            return 1.0 if self.params[0] == 0 else 0.0
        if self.kind == "two-point":
            return self.params[2] if self.params[0] == 0 else 0.0
        if self.kind == "shifted-exponential":
            return 0.0
        return 0.0

    @property
    def lower(self) -> float:
        """Infimum of the support."""
        if self.kind in ("exponential",):
            return 0.0
        return self.params[0]

    @property
    def deterministic(self) -> bool:
        return self.kind == "constant"

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        p = self.params
        if self.kind == "constant":
            return np.full_like(u, p[0])
        if self.kind == "two-point":
            return np.where(u < p[2], p[0], p[1])
        if self.kind == "uniform":
            return p[0] + (p[1] - p[0]) * u
        if self.kind == "exponential":
            return -np.log1p(-u) / p[0]
        return p[0] - np.log1p(-u) / p[1]


def _normalize_seed(seed) -> int:
    seed = int(seed)
    if not -(1 << 63) <= seed <= _MASK64:
        raise ValueError(f"seed {seed} does not fit in 64 bits")
    return seed & _MASK64


class EdgePatch:
    """Array form of an edge -> weight mapping; later entries win on merge."""

    __slots__ = ("bases", "axes", "values")

    def __init__(self, bases, axes, values, d: int | None = None):
        bases = np.asarray(bases, dtype=np.int64)
        if bases.ndim == 1 and bases.size == 0:
            bases = bases.reshape(0, d or 0)
        self.bases = bases
        self.axes = np.asarray(axes, dtype=np.int64).reshape(-1)
        self.values = np.asarray(values, dtype=np.float64).reshape(-1)
        if not (len(self.bases) == len(self.axes) == len(self.values)):
            raise ValueError("patch arrays disagree in length")
        if self.values.size and (
            not np.all(np.isfinite(self.values)) or np.any(self.values < 0)
        ):
            raise ValueError("override weights must be finite and nonnegative")
        if self.axes.size and (
            np.any(self.axes < 0) or np.any(self.axes >= self.bases.shape[1])
        ):
            raise ValueError("axis out of range")
        for arr in (self.bases, self.axes, self.values):
            arr.setflags(write=False)

    @classmethod
    def empty(cls, d: int) -> "EdgePatch":
        return cls(np.zeros((0, d), np.int64), [], [])

    @classmethod
    def from_mapping(cls, patch: Mapping, d: int) -> "EdgePatch":
        if isinstance(patch, EdgePatch):
            return patch
        if not patch:
            return cls.empty(d)
        bases, axes, vals = [], [], []
        for e, w in patch.items():
            if not isinstance(e, Edge):
                e = Edge(tuple(e[0]), int(e[1]))
            if len(e.base) != d:
                raise ValueError(f"edge {e} is not in dimension {d}")
            w = float(w)
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"override for {e} must be finite and nonnegative, got {w}")
            bases.append(e.base)
            axes.append(e.axis)
            vals.append(w)
        return cls(bases, axes, vals)

    def __len__(self):
        return len(self.values)

    @property
    def d(self) -> int:
        return self.bases.shape[1]

    def merged(self, newer: "EdgePatch") -> "EdgePatch":
        if len(newer) == 0:
            return self
        if len(self) == 0:
            return newer
        bases = np.concatenate([newer.bases, self.bases])
        axes = np.concatenate([newer.axes, self.axes])
        vals = np.concatenate([newer.values, self.values])
        keys = np.column_stack([bases, axes])
        # np.unique keeps the first occurrence, so newer entries come first
        _, first = np.unique(keys, axis=0, return_index=True)
        first.sort()
        return EdgePatch(bases[first], axes[first], vals[first])

    def to_dict(self) -> dict:
        return {
            Edge(tuple(int(c) for c in b), int(a)): float(w)
            for b, a, w in zip(self.bases, self.axes, self.values)
        }

    def apply_to_box(self, lo: np.ndarray, shape: np.ndarray, out: np.ndarray) -> None:
        """Write overrides into a (d, ncells) weight array for the box at lo."""
        if len(self) == 0:
            return
        rel = self.bases - lo
        head = rel.copy()
        head[np.arange(len(self)), self.axes] += 1
        inside = np.all((rel >= 0) & (rel < shape), axis=1) & np.all(
            (head >= 0) & (head < shape), axis=1
        )
        if not inside.any():
            return
        strides = row_major_strides(shape)
        flat = rel[inside] @ strides
        out[self.axes[inside], flat] = self.values[inside]


def row_major_strides(shape) -> np.ndarray:
    shape = np.asarray(shape, dtype=np.int64)
    strides = np.ones(len(shape), dtype=np.int64)
    for k in range(len(shape) - 2, -1, -1):
        strides[k] = strides[k + 1] * shape[k + 1]
    return strides


class WeightField:
    """Seeded weight assignment with overrides; immutable once built."""

    __slots__ = ("distribution", "seed", "d", "_patch", "_lookup")

    def __init__(self, distribution: WeightDistribution, seed: int, d: int = 2,
                 overrides: Mapping | EdgePatch | None = None):
        pc = bond_pc(d)
        if distribution.zero_mass >= pc:
            raise ValueError(
                f"P(weight = 0) = {distribution.zero_mass} is not below p_c({d}) = {pc}"
            )
        self.distribution = distribution
        self.seed = _normalize_seed(seed)
        self.d = int(d)
        patch = EdgePatch.from_mapping(overrides or {}, self.d)
        if len(patch) and patch.d != self.d:
            raise ValueError("override dimension mismatch")
        self._patch = patch
        self._lookup = None

    def __repr__(self):
        return (f"WeightField({self.distribution.kind}{self.distribution.params}, "
                f"seed={self.seed}, d={self.d}, overrides={len(self._patch)})")

    def __getstate__(self):
        return (self.distribution, self.seed, self.d, self._patch)

    def __setstate__(self, state):
        self.distribution, self.seed, self.d, self._patch = state
        self._lookup = None

    @property
    def patch(self) -> EdgePatch:
        return self._patch

    @property
    def overrides(self) -> dict:
        return dict(self._overrides_dict())

    def _overrides_dict(self) -> dict:
        if self._lookup is None:
            self._lookup = self._patch.to_dict()
        return self._lookup

    def sampled_weight(self, e: Edge) -> float:
        coords = np.asarray(e.base, dtype=np.int64)
        return float(K.edge_weight(np.uint64(self.seed), self.distribution.code,
                                   self.distribution.param_array, coords, int(e.axis)))

    def weight(self, e: Edge) -> float:
        if len(e.base) != self.d:
            raise ValueError(f"edge {e} is not in dimension {self.d}")
        if len(self._patch):
            hit = self._overrides_dict().get(Edge(tuple(e.base), int(e.axis)))
            if hit is not None:
                return hit
        return self.sampled_weight(e)

    def weights(self, bases, axes) -> np.ndarray:
        """Vectorised weights for many edges (overrides applied)."""
        bases = np.ascontiguousarray(bases, dtype=np.int64).reshape(-1, self.d)
        axes = np.ascontiguousarray(axes, dtype=np.int64).reshape(-1)
        out = np.empty(len(axes), dtype=np.float64)
        K.edge_weights_batch(np.uint64(self.seed), self.distribution.code,
                             self.distribution.param_array, bases, axes, out)
        if len(self._patch):
            lut = self._overrides_dict()
            for i, (b, a) in enumerate(zip(map(tuple, bases.tolist()), axes.tolist())):
                w = lut.get(Edge(b, a))
                if w is not None:
                    out[i] = w
        return out

    def box_weights(self, lo, shape) -> np.ndarray:
        """(d, ncells) array: weight of the edge from each cell along +e_k,
        +inf when the other endpoint leaves the box."""
        lo = np.ascontiguousarray(lo, dtype=np.int64)
        shape = np.ascontiguousarray(shape, dtype=np.int64)
        out = np.empty((self.d, int(np.prod(shape))), dtype=np.float64)
        K.fill_box_weights(np.uint64(self.seed), self.distribution.code,
                           self.distribution.param_array, lo, shape, out)
        self._patch.apply_to_box(lo, shape, out)
        return out

    def with_overrides(self, patch: Mapping | EdgePatch) -> "WeightField":
        new = EdgePatch.from_mapping(patch, self.d)
        if len(new) and new.d != self.d:
            raise ValueError("override dimension mismatch")
        return WeightField(self.distribution, self.seed, self.d,
                           self._patch.merged(new))


def weight(field: WeightField, e: Edge) -> float:
    return field.weight(e)


def with_overrides(field: WeightField, patch: Mapping | EdgePatch) -> WeightField:
    return field.with_overrides(patch)


def lattice_edges(vertices: Iterable) -> list[Edge]:
    """All edges with both endpoints in the given vertex collection."""
    vs = {tuple(v) for v in vertices}
    out = []
    for v in sorted(vs):
        for k in range(len(v)):
            w = list(v)
            w[k] += 1
            if tuple(w) in vs:
                out.append(Edge(v, k))
    return out
