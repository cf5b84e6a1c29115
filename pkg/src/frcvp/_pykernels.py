"""Pure-Python hot kernels.

These mirror ``_ckernels.pyx`` line for line and are used when the compiled
extension is unavailable (or when ``FRCVP_PURE_PYTHON=1``).
"""
from __future__ import annotations

import numpy as np


def _push(out, p, q, eps):
    if out and abs(out[-1][0] - p) <= eps and abs(out[-1][1] - q) <= eps:
        return
    out.append((p, q))


def refine(buckets, a, b, eps):
    """One refinement pass of the bucket list by the interval [a, b].

    Buckets overlapping the interval are cut at its endpoints, uncovered parts
    of the interval (outer ends and gaps) become new buckets, and a degenerate
    interval inside a bucket splits it around a singleton.  Output is built in sorted order.
    """
    out = []
    m = len(buckets)
    deg = b - a <= eps
    p1 = buckets[0][0]
    if a < p1 - eps:
        hi = min(b, p1)
        _push(out, a, hi if hi - a > eps else a, eps)
    for k in range(m):
        p, q = buckets[k]
        lo, hi = max(p, a), min(q, b)
        if lo > hi + eps:
            _push(out, p, q, eps)
        elif hi - lo > eps:
            prev = p
            for c in (a, b):
                if p + eps < c < q - eps:
                    _push(out, prev, c, eps)
                    prev = c
            _push(out, prev, q, eps)
        elif deg and q - p > eps:
            x = a
            if p + eps < x < q - eps:
                _push(out, p, x, eps)
                _push(out, x, x, eps)
                _push(out, x, q, eps)
            elif x <= p + eps:
                _push(out, p, p, eps)
                _push(out, p, q, eps)
            else:
                _push(out, p, q, eps)
                _push(out, q, q, eps)
        else:
            _push(out, p, q, eps)
        if k < m - 1:
            g0, g1 = q, buckets[k + 1][0]
            if g1 - g0 > eps:
                lo, hi = max(g0, a), min(g1, b)
                if hi - lo > eps:
                    _push(out, lo, hi, eps)
                elif lo <= hi + eps and g0 + eps < lo < g1 - eps:
                    _push(out, lo, lo, eps)
    qm = buckets[-1][1]
    if b > qm + eps:
        lo = max(a, qm)
        if b - lo > eps:
            _push(out, lo, b, eps)
        else:
            _push(out, b, b, eps)
    return out


def atd_buckets(starts, ends, eps=1e-9):
    """Adaptive discretization of intervals given in processing order."""
    starts = [float(x) for x in starts]
    ends = [float(x) for x in ends]
    buckets = [(starts[0], ends[0])]
    for a, b in zip(starts[1:], ends[1:]):
        buckets = refine(buckets, a, b, eps)
    return buckets


def enumerate_best(feas_ptr, feas_idx, route_ptr, route_idx, gain, cap, cur0, counts0, prune):
    """Depth-first search over bucket choices for a fixed vehicle order.

    ``gain[e, n]`` is the saving increase on edge ``e`` when a bucket that
    already holds ``n`` vehicles receives one more; ``cap[e]`` bounds the total
    saving achievable on ``e``; ``counts0``/``cur0`` hold vehicles fixed
    beforehand.  Returns (best value, chosen bucket per position, nodes).
    """
    V = len(feas_ptr) - 1
    E = gain.shape[0]
    feas = [list(map(int, feas_idx[feas_ptr[d]:feas_ptr[d + 1]])) for d in range(V)]
    routes = [list(map(int, route_idx[route_ptr[d]:route_ptr[d + 1]])) for d in range(V)]
    g = gain.tolist()
    capl = [float(x) for x in cap]
    cur = [float(x) for x in cur0]
    counts = counts0.astype(np.int64).tolist()
    maxinc = [max(row) if row else 0.0 for row in g]
    rem = [[0] * E for _ in range(V + 1)]
    for d in range(V - 1, -1, -1):
        rem[d] = rem[d + 1][:]
        for e in routes[d]:
            rem[d][e] += 1
    active = [[e for e in range(E) if rem[d][e]] for d in range(V + 1)]

    state = {"best": -1.0, "nodes": 0}
    choice = [0] * V
    best_choice = [0] * V

    def dfs(d, val):
        state["nodes"] += 1
        if d == V:
            if val > state["best"] + 1e-12:
                state["best"] = val
                best_choice[:] = choice
            return
        if prune:
            ub = 0.0
            rd = rem[d]
            for e in active[d]:
                x = rd[e] * maxinc[e]
                y = capl[e] - cur[e]
                ub += x if x < y else y
            if val + ub <= state["best"] + 1e-12:
                return
        route = routes[d]
        cands = []
        for t in feas[d]:
            s = 0.0
            for e in route:
                s += g[e][counts[e][t]]
            cands.append((-s, t))
        cands.sort()
        for ng, t in cands:
            for e in route:
                cur[e] += g[e][counts[e][t]]
                counts[e][t] += 1
            choice[d] = t
            dfs(d + 1, val - ng)
            for e in route:
                counts[e][t] -= 1
                cur[e] -= g[e][counts[e][t]]

    dfs(0, 0.0)
    return state["best"], np.asarray(best_choice, dtype=np.int64), state["nodes"]


def rank_one_update(T, rows, cols, u, v):
    """In place ``T[rows, cols] -= outer(u, v)`` on the given index block."""
    T[np.ix_(rows, cols)] -= np.outer(u, v)
