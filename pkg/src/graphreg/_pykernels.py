"""Pure-Python/numpy implementations of the hot loops.

These mirror ``_kernels.pyx`` call for call.  They are used when the compiled
extension is missing or ``GRAPHREG_PURE_PYTHON=1`` is set, and serve as the
reference the compiled kernels are tested against.
"""

import numpy as np
from scipy import sparse

METRIC_CODES = {"l1": 0, "squared-l2": 1, "cross-entropy": 2, "cross-entropy-symmetric": 3}


def jacobi_sweep(indptr, indices, weights, prev, base_num, base_den, nbr_scale, out):
    """One simultaneous update of every node's label distribution.

    ``out[v] = (base_num[v] + s * sum_u w_vu prev[u]) / (base_den[v] + s * sum_u w_vu)``
    with ``s = nbr_scale``; rows whose denominator is zero keep ``prev[v]``.
    Returns the largest absolute entry change.
    """
    n = prev.shape[0]
    adj = sparse.csr_matrix((weights, indices, indptr), shape=(n, n))
    degree = np.asarray(adj.sum(axis=1)).ravel()
    num = base_num + nbr_scale * (adj @ prev)
    den = base_den + nbr_scale * degree
    ok = den != 0.0
    out[ok] = num[ok] / den[ok, None]
    out[~ok] = prev[~ok]
    return float(np.max(np.abs(out - prev))) if out.size else 0.0


def neighborhood_order(n_nodes, eu, ev, perm, batch_size):
    """Greedy neighbourhood batching of an edge permutation.

    A batch starts from the next unused edge in ``perm`` and grows by taking
    unused edges incident to nodes already in the batch (breadth first, each
    node's edges in ``perm`` order).  When the batch frontier runs dry the next
    unused edge in ``perm`` seeds it again.

    Returns ``(order, bounds)``: edge ids in emission order and batch offsets.
    """
    m = len(perm)
    inc_ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    for e in perm:
        inc_ptr[eu[e] + 1] += 1
        inc_ptr[ev[e] + 1] += 1
    np.cumsum(inc_ptr, out=inc_ptr)
    fill = inc_ptr[:-1].copy()
    inc = np.empty(2 * m, dtype=np.int64)
    for e in perm:
        for x in (eu[e], ev[e]):
            inc[fill[x]] = e
            fill[x] += 1

    ptr = inc_ptr[:-1].copy()
    used = np.zeros(m, dtype=bool)
    mark = np.full(n_nodes, -1, dtype=np.int64)
    queue = np.empty(max(n_nodes, 1), dtype=np.int64)
    order = np.empty(m, dtype=np.int64)
    bounds = [0]
    emitted = 0
    cursor = 0
    stamp = -1
    while emitted < m:
        stamp += 1
        count = 0
        qhead = qtail = 0
        while count < batch_size and emitted < m:
            e = -1
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
            used[e] = True
            order[emitted] = e
            emitted += 1
            count += 1
            for x in (eu[e], ev[e]):
                if mark[x] != stamp:
                    mark[x] = stamp
                    queue[qtail] = x
                    qtail += 1
        bounds.append(emitted)
    return order, np.asarray(bounds, dtype=np.int64)


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def edge_distance(H, a, b, coef, metric):
    """Weighted sum of hidden-representation distances over node pairs.

    Returns ``(value, dH)`` where ``value = sum_k coef[k] * d(H[a[k]], H[b[k]])``
    and ``dH`` is its gradient with respect to ``H``.
    """
    dH = np.zeros_like(H)
    if len(a) == 0:
        return 0.0, dH
    hu = H[a]
    hv = H[b]
    c = coef[:, None]
    if metric == 0:
        diff = hu - hv
        per = np.abs(diff).sum(axis=1)
        g = c * np.sign(diff)
        np.add.at(dH, a, g)
        np.add.at(dH, b, -g)
    elif metric == 1:
        diff = hu - hv
        per = (diff * diff).sum(axis=1)
        g = 2.0 * c * diff
        np.add.at(dH, a, g)
        np.add.at(dH, b, -g)
    elif metric in (2, 3):
        lu = _log_softmax(hu)
        lv = _log_softmax(hv)
        pu = np.exp(lu)
        pv = np.exp(lv)
        duv = -(pv * lu).sum(axis=1)
        ga = c * (pu - pv)
        gb = -c * pv * (lu + duv[:, None])
        if metric == 2:
            per = duv
        else:
            dvu = -(pu * lv).sum(axis=1)
            per = 0.5 * (duv + dvu)
            ga = 0.5 * (ga - c * pu * (lv + dvu[:, None]))
            gb = 0.5 * (gb + c * (pv - pu))
        np.add.at(dH, a, ga)
        np.add.at(dH, b, gb)
    else:
        raise ValueError(f"unknown metric code {metric}")
    return float(np.dot(coef, per)), dH
