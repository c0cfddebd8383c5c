# cython: language_level=3
"""Cython tree grower (fast backend).

Bit-for-bit twin of ``_grow_py.grow_tree``: identical accumulation order,
gain expression, strict-> tie handling, and partition logic, with the whole
level loop fused into one call. Gradient/node lookups go through the presorted
position arrays; the indirections stay cache-resident at the row counts this
package works with.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MIN_GAIN = 1e-12


def predict_margin(
    double[:, ::1] X,
    int[::1] feat,
    double[::1] thresh,
    int[::1] left,
    int[::1] right,
    double[::1] value,
    cnp.uint8_t[::1] leaf,
    long[::1] offsets,
    double base,
):
    """Margin prediction over the flattened tree arena.

    Accumulates tree contributions in ascending tree order per row, matching
    the pure-Python per-tree loop bit for bit.
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_trees = offsets.shape[0]
    cdef cnp.ndarray[double, ndim=1] out_arr = np.full(n, base)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, i
    cdef long nd

    for t in range(n_trees):
        for i in range(n):
            nd = offsets[t]
            while not leaf[nd]:
                if X[i, feat[nd]] < thresh[nd]:
                    nd = left[nd]
                else:
                    nd = right[nd]
            out[i] += value[nd]
    return out_arr


def grow_tree(
    double[:, ::1] XT,
    double[:, ::1] vs,
    int[:, ::1] order,
    double[::1] g,
    double[::1] h,
    int max_depth,
    double lam,
    double mcw,
    double lr,
):
    cdef Py_ssize_t m = XT.shape[0]
    cdef Py_ssize_t n = XT.shape[1]
    cdef int max_nodes = (1 << (max_depth + 1)) - 1
    cdef int max_width = 1 << max_depth

    cdef cnp.ndarray[int, ndim=1] feature_arr = np.full(max_nodes, -1, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] threshold_arr = np.zeros(max_nodes)
    cdef cnp.ndarray[int, ndim=1] left_arr = np.full(max_nodes, -1, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] right_arr = np.full(max_nodes, -1, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] value_arr = np.zeros(max_nodes)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] leaf_arr = np.zeros(max_nodes, dtype=np.uint8)
    cdef cnp.ndarray[int, ndim=1] node_of_row_arr = np.zeros(n, dtype=np.int32)

    cdef int[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int[::1] left = left_arr
    cdef int[::1] right = right_arr
    cdef double[::1] value = value_arr
    cdef cnp.uint8_t[::1] is_leaf = leaf_arr
    cdef int[::1] node_of_row = node_of_row_arr

    cdef cnp.ndarray[int, ndim=1] tn_active_arr = np.empty(max_width, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] tn_next_arr = np.empty(max_width, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] remap_arr = np.full(max_nodes, -1, dtype=np.int32)
    cdef int[::1] tn_active = tn_active_arr
    cdef int[::1] tn_next = tn_next_arr
    cdef int[::1] remap = remap_arr

    cdef cnp.ndarray[double, ndim=1] tot_g_arr = np.empty(max_width)
    cdef cnp.ndarray[double, ndim=1] tot_h_arr = np.empty(max_width)
    cdef cnp.ndarray[double, ndim=1] parent_arr = np.empty(max_width)
    cdef cnp.ndarray[double, ndim=1] acc_g_arr = np.empty(max_width)
    cdef cnp.ndarray[double, ndim=1] acc_h_arr = np.empty(max_width)
    cdef cnp.ndarray[double, ndim=1] last_v_arr = np.empty(max_width)
    cdef cnp.ndarray[signed char, ndim=1] seen_arr = np.empty(max_width, dtype=np.int8)
    cdef cnp.ndarray[double, ndim=1] bg_arr = np.empty(max_width)
    cdef cnp.ndarray[int, ndim=1] bf_arr = np.empty(max_width, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] bt_arr = np.empty(max_width)
    cdef double[::1] tot_g = tot_g_arr
    cdef double[::1] tot_h = tot_h_arr
    cdef double[::1] parent = parent_arr
    cdef double[::1] acc_g = acc_g_arr
    cdef double[::1] acc_h = acc_h_arr
    cdef double[::1] last_v = last_v_arr
    cdef signed char[::1] seen = seen_arr
    cdef double[::1] bg = bg_arr
    cdef int[::1] bf = bf_arr
    cdef double[::1] bt = bt_arr

    cdef int k_nodes = 1
    cdef int next_free = 1
    cdef int depth, kk, tn, n_next, f_best
    cdef Py_ssize_t f, k, i
    cdef int nd
    cdef double v, gl, hl, gr, hr, gain

    tn_active[0] = 0
    for depth in range(max_depth + 1):
        if k_nodes == 0:
            break
        for kk in range(k_nodes):
            remap[tn_active[kk]] = kk
            tot_g[kk] = 0.0
            tot_h[kk] = 0.0
        for i in range(n):
            nd = remap[node_of_row[i]]
            if nd >= 0:
                tot_g[nd] += g[i]
                tot_h[nd] += h[i]

        if depth == max_depth:
            for kk in range(k_nodes):
                tn = tn_active[kk]
                is_leaf[tn] = 1
                value[tn] = -lr * tot_g[kk] / (tot_h[kk] + lam)
                remap[tn] = -1
            break

        for kk in range(k_nodes):
            parent[kk] = tot_g[kk] * tot_g[kk] / (tot_h[kk] + lam)
            bg[kk] = 0.0
            bf[kk] = -1
            bt[kk] = 0.0

        for f in range(m):
            for kk in range(k_nodes):
                acc_g[kk] = 0.0
                acc_h[kk] = 0.0
                seen[kk] = 0
            for k in range(n):
                i = order[f, k]
                nd = remap[node_of_row[i]]
                if nd < 0:
                    continue
                v = vs[f, k]
                if seen[nd] and v != last_v[nd]:
                    hl = acc_h[nd]
                    hr = tot_h[nd] - hl
                    if hl >= mcw and hr >= mcw:
                        gl = acc_g[nd]
                        gr = tot_g[nd] - gl
                        gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[nd]
                        if gain > bg[nd] and gain > MIN_GAIN:
                            bg[nd] = gain
                            bf[nd] = <int> f
                            bt[nd] = (last_v[nd] + v) / 2.0
                acc_g[nd] += g[i]
                acc_h[nd] += h[i]
                last_v[nd] = v
                seen[nd] = 1

        n_next = 0
        for kk in range(k_nodes):
            tn = tn_active[kk]
            if bf[kk] < 0:
                is_leaf[tn] = 1
                value[tn] = -lr * tot_g[kk] / (tot_h[kk] + lam)
            else:
                feature[tn] = bf[kk]
                threshold[tn] = bt[kk]
                left[tn] = next_free
                right[tn] = next_free + 1
                tn_next[n_next] = next_free
                tn_next[n_next + 1] = next_free + 1
                n_next += 2
                next_free += 2

        for i in range(n):
            tn = node_of_row[i]
            nd = remap[tn]
            if nd < 0 or bf[nd] < 0:
                continue
            f_best = feature[tn]
            if XT[f_best, i] < threshold[tn]:
                node_of_row[i] = left[tn]
            else:
                node_of_row[i] = right[tn]

        for kk in range(k_nodes):
            remap[tn_active[kk]] = -1
        for kk in range(n_next):
            tn_active[kk] = tn_next[kk]
        k_nodes = n_next

    return (
        feature_arr[:next_free],
        threshold_arr[:next_free],
        left_arr[:next_free],
        right_arr[:next_free],
        value_arr[:next_free],
        leaf_arr[:next_free].astype(bool),
        node_of_row_arr,
    )
