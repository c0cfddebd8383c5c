"""Pure-numpy exact-greedy split search (fallback backend).

Semantics are shared bit-for-bit with the Cython kernel: per-node gradient
prefix sums are accumulated in presorted feature order (np.cumsum is
sequential, matching the scalar loop), gains use the identical expression, and
ties are broken by lowest feature index then lowest threshold via strict
greater-than comparisons in ascending scan order.
"""
import numpy as np

#: Minimum gain for a split to beat "no split".
MIN_GAIN = 1e-12


def find_best_splits(vs, gs, hs, ns, n_nodes, tot_g, tot_h, lam, mcw):
    """Best split per active node at one tree level.

    All inputs are pre-gathered in per-feature sorted order:

    vs, gs, hs : (m, n) float64 -- feature values / gradients / hessians,
        row f sorted ascending by feature f
    ns : (m, n) int32 -- compact node index per sorted position, -1 for rows
        already in finished leaves
    tot_g, tot_h : (n_nodes,) per-node totals
    lam : L2 penalty on leaf weights
    mcw : minimum child hessian sum

    Returns (gain, feat, thresh) arrays of length n_nodes; feat = -1 where no
    valid split exists.
    """
    best_gain = np.zeros(n_nodes, dtype=np.float64)
    best_feat = np.full(n_nodes, -1, dtype=np.int32)
    best_thresh = np.zeros(n_nodes, dtype=np.float64)
    parent_score = tot_g * tot_g / (tot_h + lam)

    m = vs.shape[0]
    for f in range(m):
        nd = ns[f]
        keep = nd >= 0
        nd = nd[keep]
        v_all = vs[f, keep]
        g_all = gs[f, keep]
        h_all = hs[f, keep]
        for node in range(n_nodes):
            sel = nd == node
            if not sel.any():
                continue
            v = v_all[sel]
            if v.shape[0] < 2:
                continue
            cum_g = np.cumsum(g_all[sel])
            cum_h = np.cumsum(h_all[sel])
            cut = np.nonzero(v[:-1] != v[1:])[0]
            if cut.size == 0:
                continue
            hl = cum_h[cut]
            hr = tot_h[node] - hl
            ok = (hl >= mcw) & (hr >= mcw)
            if not ok.any():
                continue
            cut = cut[ok]
            gl = cum_g[cut]
            hl = cum_h[cut]
            gr = tot_g[node] - gl
            hr = tot_h[node] - hl
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_score[node]
            # argmax returns the first occurrence, which under ascending scan
            # order equals sequential strict-> improvement (lowest threshold).
            k = int(np.argmax(gain))
            if gain[k] > best_gain[node] and gain[k] > MIN_GAIN:
                best_gain[node] = gain[k]
                best_feat[node] = f
                best_thresh[node] = (v[cut[k]] + v[cut[k] + 1]) / 2.0
    return best_gain, best_feat, best_thresh
