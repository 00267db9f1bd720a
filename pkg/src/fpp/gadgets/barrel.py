"""The barrel region inside an l1 ball and its two-band weight configuration.

Inside Lambda(n) the corridor R-hat u L (the skin of a short fat cylinder R
plus the segment joining it to -n e1) carries cheap weights in [a - delta, a];
every other edge of Lambda(n) carries expensive weights in [b, 2b]. Two
passage-time inequalities then hold deterministically, and :func:`verify_barrel`
checks them on concrete configurations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from ..growth import box_dijkstra
from ..weights import EdgePatch, row_major_strides

MODES = ("min-extremal", "max-extremal", "sampled")


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**9)


@dataclass(frozen=True)
class BarrelSpec:
    n: int
    eps: float
    a: float
    b: float
    delta: float
    m1: int
    m3: int
    m2: int
    L: int
    d: int = 2

    @classmethod
    def build(cls, n: int, eps: float, a: float, b: float, delta: float | None = None,
              d: int = 2, enforce: bool = True) -> "BarrelSpec":
        """Floor the scale parameters from (n, eps); reject broken hypotheses.

        With ``enforce=False`` only the basic sanity checks run, which lets
        callers inspect parameter sets that fail the scale chain.
        """
        n = int(n)
        e = as_fraction(eps)
        if delta is None:
            delta = float(e**4)
        if d < 2:
            raise ValueError("dimension must be >= 2")
        if not 0 < a < b:
            raise ValueError(f"need 0 < a < b, got a={a}, b={b}")
        if not delta > 0:
            raise ValueError("delta must be positive")
        if delta > a:
            raise ValueError("delta larger than a would allow negative weights")
        ceiling = (as_fraction(b) - as_fraction(a)) / (2 * as_fraction(b) + 3 * as_fraction(a))
        if not 0 < e < ceiling:
            raise ValueError(f"eps={eps} must lie in (0, {float(ceiling):.6g})")
        m1 = math.floor(e * n)
        m3 = math.floor(e * m1)
        m2 = math.floor(e * m3)
        L = math.floor(e * m2)
        spec = cls(n, float(eps), float(a), float(b), float(delta), m1, m3, m2, L, d)
        if enforce:
            ok, why = spec.chain()
            if not ok:
                raise ValueError(f"scale chain fails for n={n}, eps={eps}: {why}")
        return spec

    def chain(self) -> tuple[bool, str]:
        """Check 1 <= m2 <= eps m3 <= eps^2 m1 <= eps^3 n exactly."""
        e = as_fraction(self.eps)
        terms = [Fraction(1), Fraction(self.m2), e * self.m3, e**2 * self.m1, e**3 * self.n]
        names = ["1", "m2", "eps*m3", "eps^2*m1", "eps^3*n"]
        for (x, nx), (y, ny) in zip(zip(terms, names), zip(terms[1:], names[1:])):
            if x > y:
                return False, f"{nx}={float(x):g} > {ny}={float(y):g}"
        return True, ""

    @property
    def kappa(self) -> float:
        e = as_fraction(self.eps)
        a = as_fraction(self.a)
        n = self.n
        return float(e**4 * n + a * (n + 2 * e**2 * n) + a * e**3 * n)

    @property
    def window_width(self) -> float:
        return float(as_fraction(self.eps) ** 4 * self.n)

    @property
    def upper_bound(self) -> float:
        return float(as_fraction(self.a) * (self.n + 2 * self.m3) + as_fraction(self.a) * self.m2)

    @property
    def lower_bound(self) -> float:
        a, dl, b = (as_fraction(v) for v in (self.a, self.delta, self.b))
        return float((a - dl) * (self.n + 2 * self.m3) + b * self.m2)

    @property
    def volume_bound(self) -> float:
        return (self.L / self.d) ** self.d

    def as_record(self) -> dict:
        return {"n": self.n, "eps": self.eps, "a": self.a, "b": self.b,
                "delta": self.delta, "m1": self.m1, "m3": self.m3, "m2": self.m2,
                "L": self.L, "d": self.d}

    def geometry(self) -> "BarrelGeometry":
        return BarrelGeometry(self)


class BarrelGeometry:
    """Masks over the box [-n-1, n+1]^d for Lambda(n), R, R-hat and L."""

    def __init__(self, spec: BarrelSpec):
        self.spec = spec
        n, d = spec.n, spec.d
        self.lo = np.full(d, -(n + 1), dtype=np.int64)
        self.shape = np.full(d, 2 * n + 3, dtype=np.int64)
        self.strides = row_major_strides(self.shape)

    @cached_property
    def _grids(self):
        n, d = self.spec.n, self.spec.d
        return np.ogrid[tuple(slice(-(n + 1), n + 2) for _ in range(d))]

    @cached_property
    def lam(self) -> np.ndarray:
        return sum(np.abs(g) for g in self._grids) <= self.spec.n

    def _in_R(self, x1, rest):
        s = self.spec
        return (x1 >= -s.m1) & (x1 <= s.m2) & (rest <= s.m3)

    @cached_property
    def region(self) -> np.ndarray:
        g = self._grids
        rest = sum(np.abs(x) for x in g[1:])
        return np.broadcast_to(self._in_R(g[0], rest), tuple(self.shape)).copy()

    @cached_property
    def rhat(self) -> np.ndarray:
        R = self.region
        pad = np.pad(R, 1)
        inner = np.ones_like(R)
        for k in range(R.ndim):
            for sh in (-1, 1):
                inner &= np.roll(pad, sh, axis=k)[tuple(slice(1, -1) for _ in range(R.ndim))]
        return R & ~inner

    def rhat_parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = self.spec
        x1 = np.broadcast_to(self._grids[0], tuple(self.shape))
        h = self.rhat
        return h & (x1 == -s.m1), h & (x1 == s.m2), h & (x1 > -s.m1) & (x1 < s.m2)

    @cached_property
    def line(self) -> np.ndarray:
        s = self.spec
        out = np.zeros(tuple(self.shape), dtype=bool)
        c = s.n + 1
        for k in range(-s.n, -s.m1 + 1):
            idx = [c] * s.d
            idx[0] = c + k
            out[tuple(idx)] = True
        return out

    @cached_property
    def corridor(self) -> np.ndarray:
        return self.rhat | self.line

    def flat(self, v) -> int:
        return int((np.asarray(v, dtype=np.int64) - self.lo) @ self.strides)

    def vertices(self, mask) -> np.ndarray:
        return np.argwhere(mask) + self.lo

    def edge_classes(self):
        """(inside, low) boolean arrays of shape (d, ncells) for forward edges."""
        d = self.spec.d
        lam = self.lam.reshape(-1)
        cor = self.corridor.reshape(-1)
        ncells = lam.size
        inside = np.zeros((d, ncells), dtype=bool)
        low = np.zeros((d, ncells), dtype=bool)
        for k in range(d):
            s = int(self.strides[k])
            inside[k, : ncells - s] = lam[: ncells - s] & lam[s:]
            low[k, : ncells - s] = cor[: ncells - s] & cor[s:]
        low &= inside
        return inside, low


def en_box_weights(spec: BarrelSpec, mode="min-extremal", seed=None,
                   geom: BarrelGeometry | None = None) -> tuple[BarrelGeometry, np.ndarray]:
    """Forward-edge weights on the barrel box; +inf off Lambda(n).

    ``mode`` is one of :data:`MODES` or a float lam in [0, 1] placing every
    weight at ``lo + lam * (hi - lo)`` within its band.
    """
    geom = geom or BarrelGeometry(spec)
    inside, low = geom.edge_classes()
    lo_low, hi_low = spec.a - spec.delta, spec.a
    lo_high, hi_high = spec.b, 2 * spec.b
    if isinstance(mode, str):
        if mode == "min-extremal":
            lam = 0.0
        elif mode == "max-extremal":
            lam = 1.0
        elif mode == "sampled":
            lam = None
        else:
            raise ValueError(f"unknown mode {mode!r}")
    else:
        lam = float(mode)
        if not 0.0 <= lam <= 1.0:
            raise ValueError("interpolation parameter must be in [0, 1]")
    if lam is None:
        u = np.random.default_rng(seed).random(inside.shape)
    else:
        u = np.full(inside.shape, lam)
    w = np.where(low, lo_low + (hi_low - lo_low) * u, lo_high + (hi_high - lo_high) * u)
    # keep extremal values exact
    if lam == 1.0:
        w = np.where(low, hi_low, hi_high)
    elif lam == 0.0:
        w = np.where(low, lo_low, lo_high)
    w[~inside] = np.inf
    return geom, w


def en_overrides(spec: BarrelSpec, mode="min-extremal", seed=None) -> EdgePatch:
    """Weights for every edge with both endpoints in Lambda(n)."""
    geom, w = en_box_weights(spec, mode, seed)
    axes, flats = np.nonzero(np.isfinite(w))
    coords = np.stack(np.unravel_index(flats, tuple(geom.shape)), axis=-1) + geom.lo
    return EdgePatch(coords, axes, w[axes, flats])


@dataclass
class BarrelReport:
    spec: BarrelSpec
    mode: object
    upper_ok: bool
    lower_ok: bool
    upper_margin: float
    lower_margin: float
    worst_upper_vertex: tuple
    worst_lower_vertex: tuple
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def worst_margins(self) -> tuple[float, float]:
        return self.upper_margin, self.lower_margin

    def as_record(self) -> dict:
        return {**self.spec.as_record(), "mode": str(self.mode),
                "upper_ok": self.upper_ok, "lower_ok": self.lower_ok,
                "upper_margin": self.upper_margin, "lower_margin": self.lower_margin,
                "seconds": round(self.seconds, 3)}


def verify_barrel(spec: BarrelSpec, mode="min-extremal", seed=None) -> BarrelReport:
    """Evaluate both barrel inequalities on one configuration.

    Upper: T_Lambda(-n e1, y) <= a(n + 2 m3) + a m2 for every y in R-hat.
    Lower: T_Lambda(x, 0) >= (a - delta)(n + 2 m3) + b m2 for every |x|_1 = n.
    """
    ok, why = spec.chain()
    if not ok:
        raise ValueError(f"scale chain fails: {why}")
    t0 = time.perf_counter()
    geom, w = en_box_weights(spec, mode, seed)
    lam = geom.lam.reshape(-1)
    start = geom.flat((-spec.n,) + (0,) * (spec.d - 1))
    t_from_tip = box_dijkstra(w, geom.shape, lam, np.array([start]), np.array([0.0]))
    rhat = geom.rhat.reshape(-1)
    idx_u = np.flatnonzero(rhat)
    worst_u = idx_u[np.argmax(t_from_tip[idx_u])]
    upper_margin = spec.upper_bound - float(t_from_tip[worst_u])

    centre = geom.flat((0,) * spec.d)
    t_from_centre = box_dijkstra(w, geom.shape, lam, np.array([centre]), np.array([0.0]))
    dist = sum(np.abs(g) for g in geom._grids).reshape(-1)
    idx_l = np.flatnonzero(dist == spec.n)
    worst_l = idx_l[np.argmin(t_from_centre[idx_l])]
    lower_margin = float(t_from_centre[worst_l]) - spec.lower_bound

    def coords(f):
        return tuple(int(c) for c in np.unravel_index(f, tuple(geom.shape)) + geom.lo)

    return BarrelReport(spec, mode, upper_margin >= 0, lower_margin >= 0,
                        upper_margin, lower_margin, coords(worst_u), coords(worst_l),
                        time.perf_counter() - t0)
