# cython: language_level=3
"""Compiled hot kernels; semantics identical to ``_pykernels``."""
import numpy as np
from libc.stdlib cimport malloc, free
from libc.math cimport fabs


cdef inline double dmax(double a, double b) nogil:
    return a if a > b else b


cdef inline double dmin(double a, double b) nogil:
    return a if a < b else b


cdef inline Py_ssize_t push(double *op, double *oq, Py_ssize_t n, double p, double q, double eps) nogil:
    if n > 0 and fabs(op[n - 1] - p) <= eps and fabs(oq[n - 1] - q) <= eps:
        return n
    op[n] = p
    oq[n] = q
    return n + 1


cdef Py_ssize_t refine(double *bp, double *bq, Py_ssize_t m, double a, double b, double eps,
                       double *op, double *oq) nogil:
    cdef Py_ssize_t n = 0, k
    cdef bint deg = b - a <= eps
    cdef double p, q, lo, hi, prev, g0, g1, x, c
    cdef double p1 = bp[0], qm = bq[m - 1]
    cdef int j
    if a < p1 - eps:
        hi = dmin(b, p1)
        n = push(op, oq, n, a, hi if hi - a > eps else a, eps)
    for k in range(m):
        p = bp[k]
        q = bq[k]
        lo = dmax(p, a)
        hi = dmin(q, b)
        if lo > hi + eps:
            n = push(op, oq, n, p, q, eps)
        elif hi - lo > eps:
            prev = p
            for j in range(2):
                c = a if j == 0 else b
                if p + eps < c and c < q - eps:
                    n = push(op, oq, n, prev, c, eps)
                    prev = c
            n = push(op, oq, n, prev, q, eps)
        elif deg and q - p > eps:
            x = a
            if p + eps < x and x < q - eps:
                n = push(op, oq, n, p, x, eps)
                n = push(op, oq, n, x, x, eps)
                n = push(op, oq, n, x, q, eps)
            elif x <= p + eps:
                n = push(op, oq, n, p, p, eps)
                n = push(op, oq, n, p, q, eps)
            else:
                n = push(op, oq, n, p, q, eps)
                n = push(op, oq, n, q, q, eps)
        else:
            n = push(op, oq, n, p, q, eps)
        if k < m - 1:
            g0 = q
            g1 = bp[k + 1]
            if g1 - g0 > eps:
                lo = dmax(g0, a)
                hi = dmin(g1, b)
                if hi - lo > eps:
                    n = push(op, oq, n, lo, hi, eps)
                elif lo <= hi + eps and g0 + eps < lo and lo < g1 - eps:
                    n = push(op, oq, n, lo, lo, eps)
    if b > qm + eps:
        lo = dmax(a, qm)
        if b - lo > eps:
            n = push(op, oq, n, lo, b, eps)
        else:
            n = push(op, oq, n, b, b, eps)
    return n


def atd_buckets(starts, ends, double eps=1e-9):
    cdef double[::1] A = np.ascontiguousarray(starts, dtype=np.float64)
    cdef double[::1] B = np.ascontiguousarray(ends, dtype=np.float64)
    cdef Py_ssize_t N = A.shape[0], cap = 8 * N + 8, m, i
    cdef double *p0 = <double *> malloc(cap * sizeof(double))
    cdef double *q0 = <double *> malloc(cap * sizeof(double))
    cdef double *p1 = <double *> malloc(cap * sizeof(double))
    cdef double *q1 = <double *> malloc(cap * sizeof(double))
    cdef double *tp
    cdef double *tq
    if not p0 or not q0 or not p1 or not q1:
        raise MemoryError()
    try:
        p0[0] = A[0]
        q0[0] = B[0]
        m = 1
        with nogil:
            for i in range(1, N):
                m = refine(p0, q0, m, A[i], B[i], eps, p1, q1)
                tp = p0; p0 = p1; p1 = tp
                tq = q0; q0 = q1; q1 = tq
        return [(p0[i], q0[i]) for i in range(m)]
    finally:
        free(p0); free(q0); free(p1); free(q1)


cdef struct Ctx:
    Py_ssize_t V, E, T, G
    long long *feas_ptr
    long long *feas_idx
    long long *route_ptr
    long long *route_idx
    double *gain
    double *cap
    double *cur
    double *maxinc
    long long *counts
    long long *rem
    long long *choice
    long long *best_choice
    double *cand_g
    long long *cand_t
    double best
    long long nodes
    bint prune


cdef void dfs(Ctx *c, Py_ssize_t d, double val) nogil:
    cdef Py_ssize_t k, j, i, e, lo, hi, r0, r1
    cdef long long t, tt, cnt
    cdef double s, ub, x, y, gg
    c.nodes += 1
    if d == c.V:
        if val > c.best + 1e-12:
            c.best = val
            for i in range(c.V):
                c.best_choice[i] = c.choice[i]
        return
    if c.prune:
        ub = 0.0
        for e in range(c.E):
            cnt = c.rem[d * c.E + e]
            if cnt:
                x = cnt * c.maxinc[e]
                y = c.cap[e] - c.cur[e]
                ub += x if x < y else y
        if val + ub <= c.best + 1e-12:
            return
    lo = c.feas_ptr[d]
    hi = c.feas_ptr[d + 1]
    r0 = c.route_ptr[d]
    r1 = c.route_ptr[d + 1]
    # gains per candidate bucket, then insertion sort by (-gain, bucket)
    for k in range(lo, hi):
        t = c.feas_idx[k]
        s = 0.0
        for j in range(r0, r1):
            e = c.route_idx[j]
            s += c.gain[e * c.G + c.counts[e * c.T + t]]
        c.cand_g[k] = -s
        c.cand_t[k] = t
    for k in range(lo + 1, hi):
        gg = c.cand_g[k]
        tt = c.cand_t[k]
        i = k - 1
        while i >= lo and (c.cand_g[i] > gg or (c.cand_g[i] == gg and c.cand_t[i] > tt)):
            c.cand_g[i + 1] = c.cand_g[i]
            c.cand_t[i + 1] = c.cand_t[i]
            i -= 1
        c.cand_g[i + 1] = gg
        c.cand_t[i + 1] = tt
    for k in range(lo, hi):
        t = c.cand_t[k]
        gg = c.cand_g[k]
        for j in range(r0, r1):
            e = c.route_idx[j]
            c.cur[e] += c.gain[e * c.G + c.counts[e * c.T + t]]
            c.counts[e * c.T + t] += 1
        c.choice[d] = t
        dfs(c, d + 1, val - gg)
        for j in range(r0, r1):
            e = c.route_idx[j]
            c.counts[e * c.T + t] -= 1
            c.cur[e] -= c.gain[e * c.G + c.counts[e * c.T + t]]


def enumerate_best(feas_ptr, feas_idx, route_ptr, route_idx, gain, cap, cur0, counts0, prune):
    cdef long long[::1] fp = np.ascontiguousarray(feas_ptr, dtype=np.int64)
    cdef long long[::1] fi = np.ascontiguousarray(feas_idx, dtype=np.int64)
    cdef long long[::1] rp = np.ascontiguousarray(route_ptr, dtype=np.int64)
    cdef long long[::1] ri = np.ascontiguousarray(route_idx, dtype=np.int64)
    g_arr = np.ascontiguousarray(gain, dtype=np.float64)
    cdef double[:, ::1] g = g_arr
    cdef double[::1] capv = np.ascontiguousarray(cap, dtype=np.float64)
    cdef double[::1] cur = np.array(cur0, dtype=np.float64)
    counts_arr = np.array(counts0, dtype=np.int64)
    cdef long long[:, ::1] counts = counts_arr
    cdef Py_ssize_t V = fp.shape[0] - 1, E = g.shape[0], G = g.shape[1]
    cdef Py_ssize_t T = counts.shape[1]
    maxinc_arr = g_arr.max(axis=1) if G > 0 else np.zeros(E)
    cdef double[::1] maxinc = np.ascontiguousarray(maxinc_arr, dtype=np.float64)
    rem_arr = np.zeros((V + 1, E), dtype=np.int64)
    cdef Py_ssize_t d, j
    for d in range(V - 1, -1, -1):
        rem_arr[d] = rem_arr[d + 1]
        for j in range(rp[d], rp[d + 1]):
            rem_arr[d, ri[j]] += 1
    cdef long long[:, ::1] rem = rem_arr
    choice_arr = np.zeros(max(V, 1), dtype=np.int64)
    best_arr = np.zeros(max(V, 1), dtype=np.int64)
    cand_g_arr = np.zeros(max(fi.shape[0], 1), dtype=np.float64)
    cand_t_arr = np.zeros(max(fi.shape[0], 1), dtype=np.int64)
    cdef long long[::1] choice = choice_arr
    cdef long long[::1] bestc = best_arr
    cdef double[::1] cg = cand_g_arr
    cdef long long[::1] ct = cand_t_arr
    cdef Ctx c
    c.V = V; c.E = E; c.T = T; c.G = G
    c.feas_ptr = &fp[0]
    c.feas_idx = &fi[0] if fi.shape[0] else NULL
    c.route_ptr = &rp[0]
    c.route_idx = &ri[0] if ri.shape[0] else NULL
    c.gain = &g[0, 0] if E * G else NULL
    c.cap = &capv[0] if E else NULL
    c.cur = &cur[0] if E else NULL
    c.maxinc = &maxinc[0] if E else NULL
    c.counts = &counts[0, 0] if E * T else NULL
    c.rem = &rem[0, 0] if E else NULL
    c.choice = &choice[0]
    c.best_choice = &bestc[0]
    c.cand_g = &cg[0]
    c.cand_t = &ct[0]
    c.best = -1.0
    c.nodes = 0
    c.prune = bool(prune)
    with nogil:
        dfs(&c, 0, 0.0)
    return c.best, best_arr[:V].copy(), int(c.nodes)


def rank_one_update(double[:, ::1] T, rows, cols, u, v):
    cdef long long[::1] ri = np.ascontiguousarray(rows, dtype=np.int64)
    cdef long long[::1] ci = np.ascontiguousarray(cols, dtype=np.int64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t a, b, i, nr = ri.shape[0], nc = ci.shape[0]
    cdef double ua
    with nogil:
        for a in range(nr):
            i = ri[a]
            ua = uu[a]
            for b in range(nc):
                T[i, ci[b]] -= ua * vv[b]
