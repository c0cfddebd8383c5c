"""Pure-Python tree grower (fallback backend).

Level-by-level growth driven by ``_split_np.find_best_splits``; produces
bit-identical trees to the Cython grower.
"""
import numpy as np

from ._split_np import find_best_splits


def grow_tree(XT, vs, order, g, h, max_depth, lam, mcw, lr):
    """Grow one depth-limited tree.

    XT : (m, n) transposed feature matrix (row access per feature)
    vs : (m, n) feature values pre-gathered in per-feature sorted order
    order : (m, n) int32 positions sorted ascending per feature
    g, h : (n,) gradient / hessian
    lr : learning rate baked into leaf values

    Returns flat tree arrays (feature, threshold, left, right, value, is_leaf)
    plus the final leaf assignment per training row.
    """
    n = XT.shape[1]
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, dtype=np.int32)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    value = np.zeros(max_nodes)
    is_leaf = np.zeros(max_nodes, dtype=bool)

    gs = np.ascontiguousarray(g[order])
    hs = np.ascontiguousarray(h[order])

    node_of_row = np.zeros(n, dtype=np.int32)
    tn_active = np.array([0], dtype=np.int32)
    next_free = 1
    for depth in range(max_depth + 1):
        if tn_active.size == 0:
            break
        k_nodes = tn_active.size
        compact_of_tn = np.full(next_free, -1, dtype=np.int32)
        compact_of_tn[tn_active] = np.arange(k_nodes, dtype=np.int32)
        node_id = compact_of_tn[node_of_row]
        live = node_id >= 0
        tot_g = np.bincount(node_id[live], weights=g[live], minlength=k_nodes)
        tot_h = np.bincount(node_id[live], weights=h[live], minlength=k_nodes)

        if depth == max_depth:
            is_leaf[tn_active] = True
            value[tn_active] = -lr * tot_g / (tot_h + lam)
            break

        ns = np.ascontiguousarray(node_id[order])
        gain, feat, thr = find_best_splits(
            vs, gs, hs, ns, k_nodes, tot_g, tot_h, lam, mcw
        )

        leaf_k = np.nonzero(feat < 0)[0]
        if leaf_k.size:
            leaf_tn = tn_active[leaf_k]
            is_leaf[leaf_tn] = True
            value[leaf_tn] = -lr * tot_g[leaf_k] / (tot_h[leaf_k] + lam)

        split_k = np.nonzero(feat >= 0)[0]
        if split_k.size == 0:
            tn_active = np.empty(0, dtype=np.int32)
            continue
        split_tn = tn_active[split_k]
        left_tn = next_free + 2 * np.arange(split_k.size, dtype=np.int32)
        feature[split_tn] = feat[split_k]
        threshold[split_tn] = thr[split_k]
        left[split_tn] = left_tn
        right[split_tn] = left_tn + 1
        next_free += 2 * split_k.size

        splitting = np.zeros(k_nodes, dtype=bool)
        splitting[split_k] = True
        rows = np.nonzero(live & splitting[np.maximum(node_id, 0)])[0]
        tn_rows = node_of_row[rows]
        go_left = XT[feature[tn_rows], rows] < threshold[tn_rows]
        node_of_row[rows] = np.where(go_left, left[tn_rows], right[tn_rows])
        tn_active = np.column_stack([left_tn, left_tn + 1]).ravel()

    used = next_free
    return (
        feature[:used],
        threshold[:used],
        left[:used],
        right[:used],
        value[:used],
        is_leaf[:used],
        node_of_row,
    )
