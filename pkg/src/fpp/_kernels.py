"""Compiled inner loops. Everything here works on flat row-major boxes.

A box is described by ``shape`` (int64[d]) and row-major ``strides``
(int64[d], in cells). Flat index order equals lexicographic coordinate order,
which is what the tie-breaking rules rely on.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO53 = 1.0 / 9007199254740992.0

KIND_CONSTANT = 0
KIND_TWO_POINT = 1
KIND_UNIFORM = 2
KIND_EXPONENTIAL = 3
KIND_SHIFTED_EXPONENTIAL = 4

STATUS_LIMIT = 0
STATUS_BORDER = 1
STATUS_TARGET = 2
STATUS_CAP = 3
STATUS_EMPTY = 4


@njit(cache=True)
def mix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def zigzag(c):
    # valid for |c| < 2**62
    if c >= 0:
        return np.uint64(c) << _ONE
    return (np.uint64(-c) << _ONE) - _ONE


@njit(cache=True)
def edge_uniform(seed, coords, axis):
    h = mix64(np.uint64(seed))
    for k in range(coords.shape[0]):
        h = mix64(h ^ zigzag(coords[k]))
    h = mix64(h ^ np.uint64(axis + 1))
    return (float(h >> _S11) + 0.5) * _TWO53


@njit(cache=True)
def ppf(kind, params, u):
    if kind == KIND_CONSTANT:
        return params[0]
    if kind == KIND_TWO_POINT:
        if u < params[2]:
            return params[0]
        return params[1]
    if kind == KIND_UNIFORM:
        return params[0] + (params[1] - params[0]) * u
    if kind == KIND_EXPONENTIAL:
        return -np.log1p(-u) / params[0]
    return params[0] - np.log1p(-u) / params[1]


@njit(cache=True)
def edge_weight(seed, kind, params, coords, axis):
    return ppf(kind, params, edge_uniform(seed, coords, axis))


@njit(cache=True)
def fill_box_weights(seed, kind, params, lo, shape, out):
    """out[k, i] = weight of edge (v_i, v_i + e_k); +inf where v_i + e_k leaves the box."""
    d = shape.shape[0]
    ncells = out.shape[1]
    idx = np.zeros(d, dtype=np.int64)
    coords = lo.copy()
    for i in range(ncells):
        for k in range(d):
            if idx[k] < shape[k] - 1:
                out[k, i] = ppf(kind, params, edge_uniform(seed, coords, k))
            else:
                out[k, i] = np.inf
        # odometer, last axis fastest
        k = d - 1
        while k >= 0:
            idx[k] += 1
            coords[k] += 1
            if idx[k] < shape[k]:
                break
            idx[k] = 0
            coords[k] = lo[k]
            k -= 1


@njit(cache=True)
def border_mask(shape, out):
    d = shape.shape[0]
    idx = np.zeros(d, dtype=np.int64)
    for i in range(out.shape[0]):
        b = False
        for k in range(d):
            if idx[k] == 0 or idx[k] == shape[k] - 1:
                b = True
        out[i] = b
        k = d - 1
        while k >= 0:
            idx[k] += 1
            if idx[k] < shape[k]:
                break
            idx[k] = 0
            k -= 1


# ---------------------------------------------------------------- indexed heap
# heap holds flat indices ordered by (times[v], v); pos[v] is the slot or -1.


@njit(cache=True, inline="always")
def _less(times, a, b):
    ta = times[a]
    tb = times[b]
    return ta < tb or (ta == tb and a < b)


@njit(cache=True)
def _sift_up(heap, pos, times, i):
    v = heap[i]
    while i > 0:
        p = (i - 1) >> 1
        u = heap[p]
        if _less(times, v, u):
            heap[i] = u
            pos[u] = i
            i = p
        else:
            break
    heap[i] = v
    pos[v] = i


@njit(cache=True)
def _sift_down(heap, pos, times, i, size):
    v = heap[i]
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and _less(times, heap[c + 1], heap[c]):
            c += 1
        u = heap[c]
        if _less(times, u, v):
            heap[i] = u
            pos[u] = i
            i = c
        else:
            break
    heap[i] = v
    pos[v] = i


@njit(cache=True)
def heap_push_or_decrease(heap, pos, times, state, v):
    i = pos[v]
    if i < 0:
        i = state[0]
        heap[i] = v
        pos[v] = i
        state[0] += 1
    _sift_up(heap, pos, times, i)


@njit(cache=True)
def heap_rebuild(heap, pos, times, size):
    for i in range(size):
        pos[heap[i]] = i
    for i in range(size // 2 - 1, -1, -1):
        _sift_down(heap, pos, times, i, size)


@njit(cache=True)
def dijkstra_run(times, rank, weights, strides, border, heap, pos, state,
                 limit, target, max_settled):
    """Settle vertices in (time, flat index) order while time <= limit.

    state = [heap_size, next_rank]. Border vertices are never expanded: the
    run stops with STATUS_BORDER so the caller can enlarge the box.
    """
    d = strides.shape[0]
    while state[0] > 0:
        v = heap[0]
        tv = times[v]
        if tv > limit:
            return STATUS_LIMIT
        if border[v]:
            return STATUS_BORDER
        if state[1] >= max_settled:
            return STATUS_CAP
        size = state[0] - 1
        state[0] = size
        pos[v] = -1
        if size > 0:
            heap[0] = heap[size]
            pos[heap[0]] = 0
            _sift_down(heap, pos, times, 0, size)
        rank[v] = state[1]
        state[1] += 1
        for k in range(d):
            s = strides[k]
            u = v + s
            if rank[u] < 0:
                nt = tv + weights[k, v]
                if nt < times[u]:
                    times[u] = nt
                    heap_push_or_decrease(heap, pos, times, state, u)
            u = v - s
            if rank[u] < 0:
                nt = tv + weights[k, u]
                if nt < times[u]:
                    times[u] = nt
                    heap_push_or_decrease(heap, pos, times, state, u)
        if v == target:
            return STATUS_TARGET
    return STATUS_EMPTY


@njit(cache=True)
def frontier_from_settled(times, rank, weights, strides, border, heap, pos, state):
    """Recompute tentative times of unsettled neighbours of settled cells and heapify."""
    d = strides.shape[0]
    n = times.shape[0]
    for v in range(n):
        if rank[v] < 0 or border[v]:
            continue
        tv = times[v]
        for k in range(d):
            s = strides[k]
            u = v + s
            if rank[u] < 0:
                nt = tv + weights[k, v]
                if nt < times[u]:
                    times[u] = nt
            u = v - s
            if rank[u] < 0:
                nt = tv + weights[k, u]
                if nt < times[u]:
                    times[u] = nt
    size = 0
    for v in range(n):
        if rank[v] < 0 and times[v] < np.inf:
            heap[size] = v
            size += 1
    state[0] = size
    heap_rebuild(heap, pos, times, size)


# ------------------------------------------------------------ geodesic support


@njit(cache=True)
def backtrack(times, rank, weights, strides, x):
    """Predecessor chain from x to the source; picks the smallest flat index
    among earlier-settled neighbours u with times[u] + w == times[x]."""
    d = strides.shape[0]
    out = np.empty(rank[x] + 1, dtype=np.int64)
    n = 0
    v = x
    while True:
        out[n] = v
        n += 1
        if rank[v] == 0:
            break
        best = -1
        tv = times[v]
        rv = rank[v]
        for k in range(d):
            s = strides[k]
            # v - s comes first in flat order
            u = v - s
            if 0 <= rank[u] < rv and times[u] + weights[k, u] == tv:
                if best < 0 or u < best:
                    best = u
            u = v + s
            if 0 <= rank[u] < rv and times[u] + weights[k, v] == tv:
                if best < 0 or u < best:
                    best = u
        if best < 0:
            return out[:0]
        v = best
    return out[:n]


@njit(cache=True)
def tight_descendants(times, rank, weights, strides, border, x):
    """Cells reachable from x by tight edges (times[u] + w == times[v]) inside
    the settled set; exactly the vertices z with T(0,z) = T(0,x) + T(x,z)."""
    d = strides.shape[0]
    seen = np.zeros(times.shape[0], dtype=np.bool_)
    stack = np.empty(times.shape[0], dtype=np.int64)
    top = 0
    stack[0] = x
    top = 1
    seen[x] = True
    count = 0
    out = np.empty(times.shape[0], dtype=np.int64)
    while top > 0:
        top -= 1
        v = stack[top]
        out[count] = v
        count += 1
        if border[v]:
            continue
        tv = times[v]
        for k in range(d):
            s = strides[k]
            u = v + s
            if rank[u] >= 0 and not seen[u] and tv + weights[k, v] == times[u]:
                seen[u] = True
                stack[top] = u
                top += 1
            u = v - s
            if rank[u] >= 0 and not seen[u] and tv + weights[k, u] == times[u]:
                seen[u] = True
                stack[top] = u
                top += 1
    return out[:count]


# ---------------------------------------------------------------- union-find


@njit(cache=True)
def _find(parent, a):
    r = a
    while parent[r] != r:
        r = parent[r]
    while parent[a] != r:
        nxt = parent[a]
        parent[a] = r
        a = nxt
    return r


@njit(cache=True)
def label_components(mask, shape):
    """Nearest-neighbour components of a flat boolean mask.

    Labels are 0..k-1 ordered by each component's first (lexicographically
    smallest) cell; -1 outside the mask. Returns (labels, k, touches_border).
    """
    d = shape.shape[0]
    n = mask.shape[0]
    strides = np.empty(d, dtype=np.int64)
    acc = 1
    for k in range(d - 1, -1, -1):
        strides[k] = acc
        acc *= shape[k]
    parent = np.empty(n, dtype=np.int64)
    idx = np.zeros(d, dtype=np.int64)
    onborder = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        if mask[i]:
            parent[i] = i
            b = False
            for k in range(d):
                if idx[k] == 0 or idx[k] == shape[k] - 1:
                    b = True
                if idx[k] > 0:
                    j = i - strides[k]
                    if mask[j]:
                        ri = _find(parent, i)
                        rj = _find(parent, j)
                        if ri != rj:
                            if ri < rj:
                                parent[rj] = ri
                            else:
                                parent[ri] = rj
            onborder[i] = b
        else:
            parent[i] = -1
        k = d - 1
        while k >= 0:
            idx[k] += 1
            if idx[k] < shape[k]:
                break
            idx[k] = 0
            k -= 1
    labels = np.full(n, -1, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    count = 0
    for i in range(n):
        if mask[i]:
            r = _find(parent, i)
            if root_label[r] < 0:
                root_label[r] = count
                count += 1
            labels[i] = root_label[r]
    touches = np.zeros(count, dtype=np.bool_)
    for i in range(n):
        if onborder[i]:
            touches[labels[i]] = True
    return labels, count, touches


# ------------------------------------------------------- Kesten enumeration


@njit(cache=True)
def min_path_through_origin(weights, strides, origin, n, wmin):
    """Minimum T over edge-self-avoiding n-edge paths through `origin`.

    Each path is split at an occurrence of the origin into two legs that both
    start there; leg one has k edges, leg two n - k. Branch and bound on the
    running cost plus wmin per remaining edge.
    """
    d = strides.shape[0]
    ndir = 2 * d
    used = np.zeros(weights.shape[0] * weights.shape[1], dtype=np.bool_)
    best = np.inf
    pos_st = np.empty(n + 1, dtype=np.int64)
    dir_st = np.empty(n + 1, dtype=np.int64)
    cost_st = np.empty(n + 1, dtype=np.float64)
    edge_st = np.empty(n + 1, dtype=np.int64)
    ncell = weights.shape[1]
    # splitting at k or n - k describes the same path set
    for k in range(n // 2 + 1):
        depth = 0
        pos_st[0] = origin
        cost_st[0] = 0.0
        dir_st[0] = 0
        while depth >= 0:
            if depth == n:
                if cost_st[depth] < best:
                    best = cost_st[depth]
                depth -= 1
                if depth >= 0:
                    used[edge_st[depth]] = False
                continue
            dd = dir_st[depth]
            if dd >= ndir:
                depth -= 1
                if depth >= 0:
                    used[edge_st[depth]] = False
                continue
            dir_st[depth] = dd + 1
            v = pos_st[depth]
            axis = dd >> 1
            s = strides[axis]
            if dd & 1 == 0:
                u = v + s
                base = v
            else:
                u = v - s
                base = u
            eid = axis * ncell + base
            if used[eid]:
                continue
            w = weights[axis, base]
            c = cost_st[depth] + w
            remaining = n - depth - 1
            if c + remaining * wmin >= best:
                continue
            used[eid] = True
            edge_st[depth] = eid
            depth += 1
            cost_st[depth] = c
            # leg two restarts at the origin once k edges are placed
            pos_st[depth] = origin if depth == k else u
            dir_st[depth] = 0
    return best


@njit(cache=True)
def edge_weights_batch(seed, kind, params, bases, axes, out):
    for i in range(axes.shape[0]):
        out[i] = ppf(kind, params, edge_uniform(seed, bases[i], axes[i]))
