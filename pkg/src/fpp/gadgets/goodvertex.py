"""(b', n)-good vertices of a ball: empty l1 balls just outside B with a short
cheap bridge back to B."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import CertificateError
from ..lattice import l1_ball
from ..weights import Edge


@dataclass(frozen=True)
class GoodVertexCertificate:
    x: tuple
    path: tuple  # vertices of gamma_x, starting at x +- n e_j
    e_x: Edge    # joins path[-1] to a vertex of B
    b_prime: float
    n: int

    @property
    def entry(self) -> tuple[int, int]:
        """(axis j, sign s) with path[0] = x + s n e_j."""
        diff = np.subtract(self.path[0], self.x)
        j = int(np.flatnonzero(diff)[0])
        return j, int(np.sign(diff[j]))

    @property
    def ball_vertex(self) -> tuple:
        u, v = self.e_x.endpoints()
        return u if v == tuple(self.path[-1]) else v


@dataclass
class ScanResult:
    certificates: list
    n: int
    b_prime: float
    ball_volume: int
    candidates: int = 0
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.certificates)

    def __iter__(self):
        return iter(self.certificates)

    def __getitem__(self, i):
        return self.certificates[i]

    @property
    def count(self) -> int:
        return len(self.certificates)

    @property
    def density(self) -> float:
        """count / (#B^{(d-1)/d} / n^{d-1})."""
        if not self.certificates:
            return 0.0
        d = len(self.certificates[0].x)
        return self.count * self.n ** (d - 1) / self.ball_volume ** ((d - 1) / d)


def default_path_edges(n: int) -> int:
    return math.isqrt(n)


def scan_good_vertices(ball, b_prime: float, n: int, max_path_edges: int | None = None,
                       limit: int | None = None) -> ScanResult:
    """Greedy lexicographic scan with pairwise l1 spacing >= 4n.

    ``max_path_edges`` caps #edges(gamma); it defaults to floor(sqrt(n)) and
    may be set lower to demand tighter bridges.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cap = default_path_edges(n) if max_path_edges is None else int(max_path_edges)
    if cap < 0 or cap > math.sqrt(n):
        raise ValueError(f"max_path_edges must be in [0, sqrt(n)], got {cap}")
    B = ball.to_lattice_set()
    d = B.d
    pad = n + cap + 3
    box = B.padded(pad)
    inB = box.mask
    shape = np.array(inB.shape, dtype=np.int64)
    dist = ndimage.distance_transform_cdt(~inB, metric="taxicab")
    cand = np.argwhere(dist == n + 1)  # lexicographic
    # cheap B-edges: for every non-B cell, the lightest edge into B (if <= b')
    wts = ball.field.box_weights(box.lo, shape).reshape((d,) + tuple(shape))
    best_w = np.full(inB.shape, np.inf)
    best_nb = np.full(inB.shape + (d,), -1, dtype=np.int64)
    idx_all = np.indices(inB.shape).transpose(tuple(range(1, d + 1)) + (0,))
    for k in range(d):
        lo_sl = [slice(None)] * d
        hi_sl = [slice(None)] * d
        lo_sl[k] = slice(0, -1)
        hi_sl[k] = slice(1, None)
        lo_sl, hi_sl = tuple(lo_sl), tuple(hi_sl)
        w = wts[k][lo_sl]
        # lower cell outside B, upper cell in B, and vice versa
        for out_sl, in_sl in ((lo_sl, hi_sl), (hi_sl, lo_sl)):
            m = ~inB[out_sl] & inB[in_sl]
            bw = best_w[out_sl]
            better = m & (w < bw)
            bw[better] = w[better]
            best_nb[out_sl][better] = idx_all[in_sl][better]
    cheap = best_w <= b_prime

    accepted: list[GoodVertexCertificate] = []
    acc_pts: list[np.ndarray] = []
    for c in cand:
        if limit is not None and len(accepted) >= limit:
            break
        if acc_pts and np.min(np.abs(np.asarray(acc_pts) - c).sum(axis=1)) < 4 * n:
            continue
        found = _bridge(c, n, cap, inB, dist, cheap, best_w)
        if found is None:
            continue
        path, end = found
        nb = best_nb[tuple(end)]
        lo = box.lo
        x = tuple(int(v) for v in c + lo)
        verts = tuple(tuple(int(v) for v in p + lo) for p in path)
        e_x = Edge.between(tuple(int(v) for v in end + lo), tuple(int(v) for v in nb + lo))
        accepted.append(GoodVertexCertificate(x, verts, e_x, float(b_prime), int(n)))
        acc_pts.append(c)
    return ScanResult(accepted, n, float(b_prime), int(inB.sum()), len(cand),
                      {"max_path_edges": cap})


def _bridge(c, n, cap, inB, dist, cheap, best_w):
    """Shortest gamma from a tip c +- n e_j to a cheap cell; BFS, fixed order."""
    d = len(c)
    shape = inB.shape
    best = None
    for j in range(d):
        for s in (1, -1):
            tip = c.copy()
            tip[j] += s * n
            if np.any(tip < 0) or np.any(tip >= shape):
                continue
            res = _bfs(tuple(tip), tuple(c), n, cap, inB, cheap, best_w)
            if res is not None and (best is None or len(res[0]) < len(best[0])):
                best = res
    return best


def _bfs(tip, c, n, cap, inB, cheap, best_w):
    shape = inB.shape
    d = len(tip)
    if inB[tip]:
        return None
    parent = {tip: None}
    frontier = deque([(tip, 0)])
    hits = []
    hit_depth = None
    while frontier:
        v, depth = frontier.popleft()
        if hit_depth is not None and depth > hit_depth:
            break
        if cheap[v]:
            hits.append(v)
            hit_depth = depth
            continue
        if depth == cap:
            continue
        for k in range(d):
            for s in (1, -1):
                w = list(v)
                w[k] += s
                w = tuple(w)
                if w in parent or not (0 <= w[k] < shape[k]):
                    continue
                if inB[w] or sum(abs(a - b) for a, b in zip(w, c)) < n:
                    continue
                parent[w] = v
                frontier.append((w, depth + 1))
    if not hits:
        return None
    end = min(hits, key=lambda h: (best_w[h], h))
    path = []
    v = end
    while v is not None:
        path.append(np.array(v))
        v = parent[v]
    return path[::-1], np.array(end)


def validate_certificate(ball, cert: GoodVertexCertificate) -> None:
    """Raise CertificateError unless cert satisfies every defining predicate."""
    x = np.asarray(cert.x, dtype=np.int64)
    d, n = len(x), cert.n
    B = ball.to_lattice_set()
    near = l1_ball(n + 1, d, x)
    overlap = B.embedded(near.lo, near.mask.shape) & near.mask
    inner = l1_ball(n, d, x)
    if np.any(B.embedded(inner.lo, inner.mask.shape) & inner.mask):
        raise CertificateError("x + Lambda(n) meets the ball")
    if not overlap.any():
        raise CertificateError("x + Lambda(n+1) misses the ball")
    path = [tuple(p) for p in cert.path]
    if not path:
        raise CertificateError("empty path")
    start = np.subtract(path[0], cert.x)
    if np.count_nonzero(start) != 1 or np.abs(start).sum() != n:
        raise CertificateError("path does not start at x +- n e_j")
    if len(path) - 1 > math.sqrt(n):
        raise CertificateError("path longer than sqrt(n) edges")
    for u, v in zip(path, path[1:]):
        if np.abs(np.subtract(u, v)).sum() != 1:
            raise CertificateError(f"{u} and {v} are not adjacent")
    for p in path:
        if np.abs(np.subtract(p, cert.x)).sum() < n:
            raise CertificateError(f"path enters x + Lambda(n-1) at {p}")
        if B.contains(p):
            raise CertificateError(f"path meets the ball at {p}")
    u, v = cert.e_x.endpoints()
    end = path[-1]
    if end not in (u, v):
        raise CertificateError("e_x does not touch the path end")
    other = v if end == u else u
    if not B.contains(other):
        raise CertificateError("e_x does not reach the ball")
    w = ball.field.weight(cert.e_x)
    if not w <= cert.b_prime:
        raise CertificateError(f"weight of e_x is {w} > b' = {cert.b_prime}")


def is_valid_certificate(ball, cert) -> bool:
    try:
        validate_certificate(ball, cert)
    except CertificateError:
        return False
    return True

