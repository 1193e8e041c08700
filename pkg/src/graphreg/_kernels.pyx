# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``.

Signatures and semantics match the pure-Python module exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs

cnp.import_array()

METRIC_CODES = {"l1": 0, "squared-l2": 1, "cross-entropy": 2, "cross-entropy-symmetric": 3}


def jacobi_sweep(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                 const double[::1] weights, const double[:, ::1] prev,
                 const double[:, ::1] base_num, const double[::1] base_den,
                 double nbr_scale, double[:, ::1] out):
    cdef Py_ssize_t n = prev.shape[0]
    cdef Py_ssize_t L = prev.shape[1]
    cdef Py_ssize_t v, j, l, u
    cdef double wsum, w, den, change, max_change = 0.0
    cdef double[::1] acc = np.zeros(L, dtype=np.float64)
    for v in range(n):
        for l in range(L):
            acc[l] = 0.0
        wsum = 0.0
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            w = weights[j]
            wsum += w
            for l in range(L):
                acc[l] += w * prev[u, l]
        den = base_den[v] + nbr_scale * wsum
        if den == 0.0:
            for l in range(L):
                out[v, l] = prev[v, l]
            continue
        for l in range(L):
            out[v, l] = (base_num[v, l] + nbr_scale * acc[l]) / den
            change = fabs(out[v, l] - prev[v, l])
            if change > max_change:
                max_change = change
    return max_change


def neighborhood_order(Py_ssize_t n_nodes, const cnp.int64_t[::1] eu,
                       const cnp.int64_t[::1] ev, const cnp.int64_t[::1] perm,
                       Py_ssize_t batch_size):
    cdef Py_ssize_t m = perm.shape[0]
    cdef Py_ssize_t p, e, x, node, end, k
    cdef cnp.int64_t[::1] inc_ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] fill
    cdef cnp.int64_t[::1] inc = np.empty(2 * m, dtype=np.int64)
    cdef cnp.int64_t[::1] ptr
    cdef cnp.uint8_t[::1] used = np.zeros(m, dtype=np.uint8)
    cdef cnp.int64_t[::1] mark = np.full(n_nodes, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.empty(max(n_nodes, 1), dtype=np.int64)
    order_arr = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] order = order_arr
    bounds = [0]
    cdef Py_ssize_t emitted = 0, cursor = 0, count, qhead, qtail
    cdef cnp.int64_t stamp = -1
    cdef cnp.int64_t ends[2]

    for p in range(m):
        e = perm[p]
        inc_ptr[eu[e] + 1] += 1
        inc_ptr[ev[e] + 1] += 1
    for x in range(n_nodes):
        inc_ptr[x + 1] += inc_ptr[x]
    fill = np.array(inc_ptr[:n_nodes], dtype=np.int64)
    for p in range(m):
        e = perm[p]
        x = eu[e]
        inc[fill[x]] = e
        fill[x] += 1
        x = ev[e]
        inc[fill[x]] = e
        fill[x] += 1
    ptr = np.array(inc_ptr[:n_nodes], dtype=np.int64)

    while emitted < m:
        stamp += 1
        count = 0
        qhead = 0
        qtail = 0
        while count < batch_size and emitted < m:
            if qhead < qtail:
                node = queue[qhead]
                end = inc_ptr[node + 1]
                while ptr[node] < end and used[inc[ptr[node]]]:
                    ptr[node] += 1
                if ptr[node] < end:
                    e = inc[ptr[node]]
                    ptr[node] += 1
                else:
                    qhead += 1
                    continue
            else:
                while used[perm[cursor]]:
                    cursor += 1
                e = perm[cursor]
            used[e] = 1
            order[emitted] = e
            emitted += 1
            count += 1
            ends[0] = eu[e]
            ends[1] = ev[e]
            for k in range(2):
                x = ends[k]
                if mark[x] != stamp:
                    mark[x] = stamp
                    queue[qtail] = x
                    qtail += 1
        bounds.append(emitted)
    return order_arr, np.asarray(bounds, dtype=np.int64)


cdef inline void _log_softmax_row(const double[:, ::1] H, Py_ssize_t r, double[::1] out) noexcept nogil:
    cdef Py_ssize_t j, D = H.shape[1]
    cdef double mx = H[r, 0], s = 0.0, lse
    for j in range(1, D):
        if H[r, j] > mx:
            mx = H[r, j]
    for j in range(D):
        s += exp(H[r, j] - mx)
    lse = log(s)
    for j in range(D):
        out[j] = H[r, j] - mx - lse


def edge_distance(const double[:, ::1] H, const cnp.int64_t[::1] a,
                  const cnp.int64_t[::1] b, const double[::1] coef, int metric):
    cdef Py_ssize_t K = a.shape[0], D = H.shape[1]
    cdef Py_ssize_t k, j, ia, ib
    cdef double c, diff, per, duv, dvu, total = 0.0
    dH_arr = np.zeros((H.shape[0], D), dtype=np.float64)
    cdef double[:, ::1] dH = dH_arr
    cdef double[::1] lu = np.empty(D, dtype=np.float64)
    cdef double[::1] lv = np.empty(D, dtype=np.float64)
    if metric < 0 or metric > 3:
        raise ValueError(f"unknown metric code {metric}")
    for k in range(K):
        ia = a[k]
        ib = b[k]
        c = coef[k]
        per = 0.0
        if metric == 0:
            for j in range(D):
                diff = H[ia, j] - H[ib, j]
                per += fabs(diff)
                if diff > 0.0:
                    dH[ia, j] += c
                    dH[ib, j] -= c
                elif diff < 0.0:
                    dH[ia, j] -= c
                    dH[ib, j] += c
        elif metric == 1:
            for j in range(D):
                diff = H[ia, j] - H[ib, j]
                per += diff * diff
                dH[ia, j] += 2.0 * c * diff
                dH[ib, j] -= 2.0 * c * diff
        else:
            _log_softmax_row(H, ia, lu)
            _log_softmax_row(H, ib, lv)
            duv = 0.0
            dvu = 0.0
            for j in range(D):
                duv -= exp(lv[j]) * lu[j]
                dvu -= exp(lu[j]) * lv[j]
            if metric == 2:
                per = duv
                for j in range(D):
                    dH[ia, j] += c * (exp(lu[j]) - exp(lv[j]))
                    dH[ib, j] -= c * exp(lv[j]) * (lu[j] + duv)
            else:
                per = 0.5 * (duv + dvu)
                for j in range(D):
                    dH[ia, j] += 0.5 * (c * (exp(lu[j]) - exp(lv[j]))
                                        - c * exp(lu[j]) * (lv[j] + dvu))
                    dH[ib, j] += 0.5 * (-c * exp(lv[j]) * (lu[j] + duv)
                                        + c * (exp(lv[j]) - exp(lu[j])))
        total += c * per
    return total, dH_arr
