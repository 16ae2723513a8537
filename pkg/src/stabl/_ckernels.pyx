# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same signatures and arithmetic contract as ``_pykernels``."""
import numpy as np

from libc.math cimport exp, sqrt, INFINITY, NAN
from libc.stdint cimport uint64_t, int64_t, uint8_t
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm, dgemv

cdef enum:
    BLOCK = 1024
    POWER_ITERS = 50

cdef double TWO_M53 = 1.1102230246251565e-16


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _kahan(double* s, double* comp, double v) noexcept nogil:
    # Neumaier variant
    cdef double t = s[0] + v
    if abs(s[0]) >= abs(v):
        comp[0] += (s[0] - t) + v
    else:
        comp[0] += (v - t) + s[0]
    s[0] = t


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _table_value(uint64_t key, double low, double span) noexcept nogil:
    return low + span * ((<double>(_mix(key) >> 11) + 0.5) * TWO_M53)


def _absent_csr(const uint8_t[:, ::1] A):
    cdef Py_ssize_t C = A.shape[0], n = A.shape[1], c, i, k = 0
    indptr = np.zeros(C + 1, dtype=np.int64)
    indices = np.empty(C * n, dtype=np.int64)
    cdef int64_t[::1] ip = indptr, ix = indices
    for c in range(C):
        for i in range(n):
            if A[c, i]:
                ix[k] = i
                k += 1
        ip[c + 1] = k
    return indptr, indices[:k]


cdef _finish(double[::1] shift, double wsum, double[::1] tot, double[::1] tot_c, double[:, ::1] num,
             double[:, ::1] num_c, double[::1] mass, double[::1] mass_c):
    cdef Py_ssize_t L = num.shape[0], n = num.shape[1], l, i
    total = np.empty(L)
    loo = np.empty((L, n))
    absent_mass = np.empty(n)
    cdef double[::1] T = total, M = absent_mass
    cdef double[:, ::1] O = loo
    for i in range(n):
        M[i] = mass[i] + mass_c[i]
    for l in range(L):
        T[l] = shift[l] + (tot[l] + tot_c[l]) / wsum
        for i in range(n):
            O[l, i] = shift[l] + (num[l, i] + num_c[l, i]) / M[i] if M[i] > 0 else NAN
    return total, loo, absent_mass


def conditional_means(values, weights, absent):
    """Weighted mean of per-class values, overall and conditioned on each index being absent.

    Returns ``(total, loo, absent_mass)`` with shapes (L,), (L, n), (n,).
    Values are accumulated relative to each row's minimum and the total is
    normalized by the summed weight, so a constant row comes back exactly.
    """
    cdef const double[:, ::1] V = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const uint8_t[:, ::1] A = np.ascontiguousarray(absent, dtype=np.uint8)
    indptr, indices = _absent_csr(A)
    cdef const int64_t[::1] ip = indptr, ix = indices
    cdef Py_ssize_t L = V.shape[0], C = V.shape[1], n = A.shape[1]
    cdef Py_ssize_t l, c, k, i, start, stop
    cdef double v, wsum = 0.0, wsum_c = 0.0, pw
    cdef double[::1] shift = np.zeros(L)
    for l in range(L):
        if C:
            shift[l] = V[l, 0]
            for c in range(1, C):
                if V[l, c] < shift[l]:
                    shift[l] = V[l, c]
    cdef double[::1] tot = np.zeros(L), tot_c = np.zeros(L), ptot = np.zeros(L)
    cdef double[::1] mass = np.zeros(n), mass_c = np.zeros(n), pmass = np.zeros(n)
    cdef double[:, ::1] num = np.zeros((L, n)), num_c = np.zeros((L, n)), pnum = np.zeros((L, n))
    with nogil:
        start = 0
        while start < C:
            stop = min(start + BLOCK, C)
            ptot[:] = 0.0
            pnum[:, :] = 0.0
            pmass[:] = 0.0
            for c in range(start, stop):
                for k in range(ip[c], ip[c + 1]):
                    pmass[ix[k]] += w[c]
            pw = 0.0
            for c in range(start, stop):
                pw += w[c]
            _kahan(&wsum, &wsum_c, pw)
            for l in range(L):
                for c in range(start, stop):
                    v = (V[l, c] - shift[l]) * w[c]
                    ptot[l] += v
                    for k in range(ip[c], ip[c + 1]):
                        pnum[l, ix[k]] += v
            for i in range(n):
                _kahan(&mass[i], &mass_c[i], pmass[i])
            for l in range(L):
                _kahan(&tot[l], &tot_c[l], ptot[l])
                for i in range(n):
                    _kahan(&num[l, i], &num_c[l, i], pnum[l, i])
            start = stop
    return _finish(shift, wsum + wsum_c, tot, tot_c, num, num_c, mass, mass_c)


def table_conditional_means(keys, seedwords, weights, absent, double low=0.0, double high=1.0):
    """:func:`conditional_means` for hash-table learners, one per seed word, without an L x C matrix."""
    cdef const uint64_t[::1] K = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef const uint64_t[::1] S = np.ascontiguousarray(seedwords, dtype=np.uint64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const uint8_t[:, ::1] A = np.ascontiguousarray(absent, dtype=np.uint8)
    indptr, indices = _absent_csr(A)
    cdef const int64_t[::1] ip = indptr, ix = indices
    cdef Py_ssize_t L = S.shape[0], C = K.shape[0], n = A.shape[1]
    cdef Py_ssize_t l, c, k, i, start, stop
    cdef double v, span = high - low, wsum = 0.0, wsum_c = 0.0, pw
    cdef uint64_t s
    cdef double[::1] shift = np.zeros(L)
    if C:
        for l in range(L):
            shift[l] = _table_value(K[0] ^ S[l], low, span)
            for c in range(1, C):
                v = _table_value(K[c] ^ S[l], low, span)
                if v < shift[l]:
                    shift[l] = v
    cdef double[::1] tot = np.zeros(L), tot_c = np.zeros(L), ptot = np.zeros(L)
    cdef double[::1] mass = np.zeros(n), mass_c = np.zeros(n), pmass = np.zeros(n)
    cdef double[:, ::1] num = np.zeros((L, n)), num_c = np.zeros((L, n)), pnum = np.zeros((L, n))
    with nogil:
        start = 0
        while start < C:
            stop = min(start + BLOCK, C)
            ptot[:] = 0.0
            pnum[:, :] = 0.0
            pmass[:] = 0.0
            for c in range(start, stop):
                for k in range(ip[c], ip[c + 1]):
                    pmass[ix[k]] += w[c]
            pw = 0.0
            for c in range(start, stop):
                pw += w[c]
            _kahan(&wsum, &wsum_c, pw)
            for l in range(L):
                s = S[l]
                for c in range(start, stop):
                    v = (_table_value(K[c] ^ s, low, span) - shift[l]) * w[c]
                    ptot[l] += v
                    for k in range(ip[c], ip[c + 1]):
                        pnum[l, ix[k]] += v
            for i in range(n):
                _kahan(&mass[i], &mass_c[i], pmass[i])
            for l in range(L):
                _kahan(&tot[l], &tot_c[l], ptot[l])
                for i in range(n):
                    _kahan(&num[l, i], &num_c[l, i], pnum[l, i])
            start = stop
    return _finish(shift, wsum + wsum_c, tot, tot_c, num, num_c, mass, mass_c)


# ------------------------------------------------------------ row-major BLAS


cdef inline void _gemv_rows(int rows, int cols, double alpha, const double* A, const double* x,
                            double beta, double* y) noexcept nogil:
    # y = alpha * A @ x + beta * y, A row-major (rows x cols)
    cdef char t = b'T'
    cdef int one = 1
    dgemv(&t, &cols, &rows, &alpha, <double*>A, &cols, <double*>x, &one, &beta, y, &one)


cdef inline void _gemv_cols(int rows, int cols, double alpha, const double* A, const double* x,
                            double beta, double* y) noexcept nogil:
    # y = alpha * A.T @ x + beta * y, A row-major (rows x cols)
    cdef char t = b'N'
    cdef int one = 1
    dgemv(&t, &cols, &rows, &alpha, <double*>A, &cols, <double*>x, &one, &beta, y, &one)


cdef double _logistic_step(const double* X, int m, int d, double c, double* v, double* u, double* w) noexcept nogil:
    cdef int it, k
    cdef double lam = 0.0, norm
    for k in range(d):
        v[k] = 1.0 / sqrt(<double>d)
    for it in range(POWER_ITERS):
        _gemv_rows(m, d, 1.0, X, v, 0.0, u)
        _gemv_cols(m, d, 1.0, X, u, 0.0, w)
        lam = 0.0
        norm = 0.0
        for k in range(d):
            lam += v[k] * w[k]
            norm += w[k] * w[k]
        norm = sqrt(norm)
        if norm == 0.0:
            break
        for k in range(d):
            v[k] = w[k] / norm
    return 1.0 / (c * lam / 4.0 + 1.0)


def logistic_step(X, double c):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef int m = Xv.shape[0], d = Xv.shape[1]
    cdef double[::1] v = np.empty(d), u = np.empty(max(m, 1)), w = np.empty(d)
    return _logistic_step(&Xv[0, 0], m, d, c, &v[0], &u[0], &w[0])


def logistic_gd(X, y, double c, int iters):
    """Full-batch gradient descent on ``c * sum(logloss) + 0.5 * |theta|^2`` from theta = 0."""
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef int m = Xv.shape[0], d = Xv.shape[1], it, j, k
    theta = np.zeros(d)
    if m == 0 or d == 0:
        return theta
    cdef double[::1] th = theta, g = np.empty(d), z = np.empty(m), v = np.empty(d)
    cdef double step
    with nogil:
        step = _logistic_step(&Xv[0, 0], m, d, c, &v[0], &z[0], &g[0])
        for it in range(iters):
            _gemv_rows(m, d, 1.0, &Xv[0, 0], &th[0], 0.0, &z[0])
            for j in range(m):
                z[j] = _sigmoid(z[j]) - yv[j]
            _gemv_cols(m, d, c, &Xv[0, 0], &z[0], 0.0, &g[0])
            for k in range(d):
                th[k] = th[k] - step * (g[k] + th[k])
    return theta


# ------------------------------------------------------------------------ MLP


def mlp_train(X, y, W1, b1, W2, double b2, perms, double lr, double alpha, double momentum, int batch):
    """Mini-batch SGD with Nesterov momentum; ``perms[e]`` orders the rows in epoch e."""
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    perms = np.asarray(perms, dtype=np.int64)
    if perms.size == 0:
        perms = np.zeros((0, 1), dtype=np.int64)
    else:
        perms = perms.reshape(len(perms), -1)
    cdef const int64_t[:, ::1] P = np.ascontiguousarray(perms)
    W1o = np.array(W1, dtype=np.float64, order="C")
    b1o = np.array(b1, dtype=np.float64)
    W2o = np.array(W2, dtype=np.float64)
    cdef double[:, ::1] w1 = W1o
    cdef double[::1] bb1 = b1o, w2 = W2o
    cdef int m = Xv.shape[0], d = Xv.shape[1], h = w1.shape[1]
    cdef int E = P.shape[0] if m > 0 else 0
    cdef int e, start, bs, r, j, k
    batch = max(1, min(batch, max(m, 1)))
    cdef double[:, ::1] Xb = np.empty((batch, d)), Z = np.empty((batch, h)), D1 = np.empty((batch, h))
    cdef double[:, ::1] gW1 = np.empty((d, h)), vW1 = np.zeros((d, h))
    cdef double[::1] yb = np.empty(batch), o = np.empty(batch), gW2 = np.empty(h), vW2 = np.zeros(h)
    cdef double[::1] gb1 = np.empty(h), vb1 = np.zeros(h)
    cdef double gb2, vb2 = 0.0, inv, g
    cdef char nn = b'N', tt = b'T'
    cdef double one = 1.0, zero = 0.0
    with nogil:
        for e in range(E):
            start = 0
            while start < m:
                bs = min(batch, m - start)
                inv = 1.0 / bs
                for r in range(bs):
                    j = P[e, start + r]
                    memcpy(&Xb[r, 0], &Xv[j, 0], d * sizeof(double))
                    yb[r] = yv[j]
                # Z = Xb @ W1 + b1, then relu
                dgemm(&nn, &nn, &h, &bs, &d, &one, &w1[0, 0], &h, &Xb[0, 0], &d, &zero, &Z[0, 0], &h)
                for r in range(bs):
                    for k in range(h):
                        Z[r, k] += bb1[k]
                        D1[r, k] = Z[r, k] if Z[r, k] > 0 else 0.0
                # o = sigmoid(A1 @ W2 + b2); delta2 = o - y
                _gemv_rows(bs, h, 1.0, &D1[0, 0], &w2[0], 0.0, &o[0])
                gb2 = 0.0
                for r in range(bs):
                    o[r] = _sigmoid(o[r] + b2) - yb[r]
                    gb2 += o[r]
                gb2 = gb2 * inv
                _gemv_cols(bs, h, 1.0, &D1[0, 0], &o[0], 0.0, &gW2[0])
                for k in range(h):
                    gW2[k] = (gW2[k] + alpha * w2[k]) * inv
                    gb1[k] = 0.0
                for r in range(bs):
                    for k in range(h):
                        D1[r, k] = o[r] * w2[k] if Z[r, k] > 0 else 0.0
                        gb1[k] += D1[r, k]
                # gW1 = Xb.T @ D1
                dgemm(&nn, &tt, &h, &d, &bs, &one, &D1[0, 0], &h, &Xb[0, 0], &d, &zero, &gW1[0, 0], &h)
                for j in range(d):
                    for k in range(h):
                        g = (gW1[j, k] + alpha * w1[j, k]) * inv
                        vW1[j, k] = momentum * vW1[j, k] - lr * g
                        w1[j, k] = w1[j, k] + (momentum * vW1[j, k] - lr * g)
                for k in range(h):
                    g = gb1[k] * inv
                    vb1[k] = momentum * vb1[k] - lr * g
                    bb1[k] = bb1[k] + (momentum * vb1[k] - lr * g)
                    vW2[k] = momentum * vW2[k] - lr * gW2[k]
                    w2[k] = w2[k] + (momentum * vW2[k] - lr * gW2[k])
                vb2 = momentum * vb2 - lr * gb2
                b2 = b2 + (momentum * vb2 - lr * gb2)
                start += bs
    return W1o, b1o, W2o, float(b2)


# ----------------------------------------------------------------------- tree


def tree_build(X, y, int max_depth):
    """Greedy CART regression tree; returns node arrays (feature, threshold, left, right, value).

    Each node owns one segment of d + 1 presorted index lists (by feature value
    then row index, plus plain row order); splits partition every list stably.
    """
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef int m = Xv.shape[0], d = Xv.shape[1]
    order_np = np.empty((d + 1, m), dtype=np.int64)
    if d:
        order_np[:d] = np.argsort(np.asarray(Xv), axis=0, kind="stable").T
    order_np[d] = np.arange(m)
    cdef int64_t[:, ::1] order = order_np
    cdef int64_t[::1] tmp = np.empty(max(m, 1), dtype=np.int64)
    cdef uint8_t[::1] goleft = np.zeros(max(m, 1), dtype=np.uint8)
    cap = max(2 * m - 1, 1)
    feat_np = np.full(cap, -1, dtype=np.int64)
    thr_np = np.zeros(cap)
    left_np = np.full(cap, -1, dtype=np.int64)
    right_np = np.full(cap, -1, dtype=np.int64)
    val_np = np.zeros(cap)
    cdef int64_t[::1] feat = feat_np, lft = left_np, rgt = right_np
    cdef double[::1] thr = thr_np, val = val_np
    cdef int64_t[:, ::1] stack = np.empty((cap, 4), dtype=np.int64)
    cdef int sp = 0, nodes = 1, node, start, end, depth, cnt, f, k, s, a, b, nl_count, best_f
    cdef double tot, sl, sr, nl, score, best, best_thr, ymin, ymax, t, x0, x1
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    sp = 1
    with nogil:
        while sp > 0:
            sp -= 1
            node = stack[sp, 0]
            start = stack[sp, 1]
            end = stack[sp, 2]
            depth = stack[sp, 3]
            cnt = end - start
            tot = 0.0
            ymin = INFINITY
            ymax = -INFINITY
            for k in range(start, end):
                s = order[d, k]
                tot += yv[s]
                if yv[s] < ymin:
                    ymin = yv[s]
                if yv[s] > ymax:
                    ymax = yv[s]
            val[node] = tot / cnt
            if depth >= max_depth or cnt < 2 or ymin == ymax:
                continue
            best = -INFINITY
            best_f = -1
            best_thr = 0.0
            for f in range(d):
                tot = 0.0
                for k in range(start, end):
                    tot += yv[order[f, k]]
                sl = 0.0
                for k in range(start, end - 1):
                    s = order[f, k]
                    sl += yv[s]
                    x0 = Xv[s, f]
                    x1 = Xv[order[f, k + 1], f]
                    if not x0 < x1:
                        continue
                    nl = <double>(k - start + 1)
                    sr = tot - sl
                    score = sl * sl / nl + sr * sr / (<double>cnt - nl)
                    if score > best:
                        best = score
                        best_f = f
                        t = (x0 + x1) / 2.0
                        best_thr = x0 if t == x1 else t
            if best_f < 0:
                continue
            for k in range(start, end):
                s = order[d, k]
                goleft[s] = Xv[s, best_f] <= best_thr
            for f in range(d + 1):
                a = start
                b = 0
                for k in range(start, end):
                    s = order[f, k]
                    if goleft[s]:
                        order[f, a] = s
                        a += 1
                    else:
                        tmp[b] = s
                        b += 1
                for k in range(b):
                    order[f, a + k] = tmp[k]
                nl_count = a - start
            feat[node] = best_f
            thr[node] = best_thr
            lft[node] = nodes
            rgt[node] = nodes + 1
            stack[sp, 0] = nodes + 1
            stack[sp, 1] = start + nl_count
            stack[sp, 2] = end
            stack[sp, 3] = depth + 1
            stack[sp + 1, 0] = nodes
            stack[sp + 1, 1] = start
            stack[sp + 1, 2] = start + nl_count
            stack[sp + 1, 3] = depth + 1
            sp += 2
            nodes += 2
    return feat_np[:nodes].copy(), thr_np[:nodes].copy(), left_np[:nodes].copy(), right_np[:nodes].copy(), val_np[:nodes].copy()
