"""Numba kernels for growing and applying decision trees.

One grower serves three split criteria over per-node sufficient statistics
(the columns of T):

  crit 0  classification   T = one-hot class indicators; score sum_k S_k^2/m
  crit 1  regression       T = [y];                      score S^2/m
  crit 2  newton boosting  T = [g, h];                   score G^2/(H + lam)

and three growth modes: 0 grows every splittable node (random forests),
1 splits the open leaf with the largest gain until a leaf budget is hit
(leaf-wise boosting), 2 splits in breadth-first order under the same budget
(depth-wise boosting).

Categorical features split on category subsets: categories are ordered by a
per-category score (event rate of the node majority class, mean target, or
gradient/hessian ratio) and the ordered prefixes are scanned; the chosen
subset is stored as a bitmask, so categorical cardinality is capped at 63.
Absent categories route to the right child.

Set NUMBA_DISABLE_JIT=1 to run these as plain Python (slow but identical).
"""

import numpy as np
from numba import njit

MODE_FULL = 0
MODE_LEAFWISE = 1
MODE_DEPTHWISE = 2

CRIT_GINI = 0
CRIT_REG = 1
CRIT_BOOST = 2

_NO_SPLIT = -1.0e300


@njit(cache=True)
def _side_score(stats, cnt, crit, lam):
    if crit == CRIT_BOOST:
        return stats[0] * stats[0] / (stats[1] + lam)
    total = 0.0
    for k in range(stats.shape[0]):
        total += stats[k] * stats[k]
    return total / cnt


@njit(cache=True)
def _order_score(stats, cnt, crit, lam, kstar):
    if crit == CRIT_BOOST:
        return stats[0] / (stats[1] + lam)
    if crit == CRIT_GINI:
        return stats[kstar] / cnt
    return stats[0] / cnt


@njit(cache=True)
def _best_split_for_node(
    X, T, ncats, idx, start, end, feat_buf, mtry,
    crit, lam, min_bucket, min_child_weight, min_gain,
    xv, cat_stats, cat_cnt, cat_order, cat_scores,
):
    """Search the sampled features for the best split of idx[start:end].

    Returns (gain, feature, threshold, catmask); feature == -1 means no
    admissible split. Gains are improvements over the parent score (halved
    for the boosting criterion, matching the usual gain convention).
    """
    m = end - start
    p = X.shape[1]
    ds = T.shape[1]

    parent = np.zeros(ds)
    for i in range(start, end):
        r = idx[i]
        for k in range(ds):
            parent[k] += T[r, k]
    kstar = 0
    if crit == CRIT_GINI:
        for k in range(1, ds):
            if parent[k] > parent[kstar]:
                kstar = k
    parent_score = _side_score(parent, m, crit, lam)

    for j in range(p):
        feat_buf[j] = j
    n_try = mtry if mtry < p else p
    for t in range(n_try):
        swap = t + np.random.randint(0, p - t)
        tmp = feat_buf[t]
        feat_buf[t] = feat_buf[swap]
        feat_buf[swap] = tmp

    best_gain = _NO_SPLIT
    best_feat = -1
    best_thr = 0.0
    best_mask = np.int64(0)

    left = np.zeros(ds)
    for t in range(n_try):
        f = feat_buf[t]
        K = ncats[f]
        if K == 0:
            for i in range(m):
                xv[i] = X[idx[start + i], f]
            order = np.argsort(xv[:m], kind="mergesort")
            for k in range(ds):
                left[k] = 0.0
            run_h = 0.0
            for pos in range(m - 1):
                r = idx[start + order[pos]]
                for k in range(ds):
                    left[k] += T[r, k]
                cl = pos + 1
                cr = m - cl
                if xv[order[pos]] == xv[order[pos + 1]]:
                    continue
                if cl < min_bucket or cr < min_bucket:
                    continue
                if crit == CRIT_BOOST:
                    if left[1] < min_child_weight or parent[1] - left[1] < min_child_weight:
                        continue
                sl = _side_score(left, cl, crit, lam)
                right0 = parent[0] - left[0]
                if ds == 1:
                    sr = right0 * right0 / cr
                else:
                    if crit == CRIT_BOOST:
                        sr = right0 * right0 / (parent[1] - left[1] + lam)
                    else:
                        sr = 0.0
                        for k in range(ds):
                            d = parent[k] - left[k]
                            sr += d * d
                        sr /= cr
                gain = sl + sr - parent_score
                if crit == CRIT_BOOST:
                    gain *= 0.5
                if gain > best_gain and gain > min_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (xv[order[pos]] + xv[order[pos + 1]])
                    best_mask = np.int64(0)
        else:
            for c in range(K):
                cat_cnt[c] = 0
                for k in range(ds):
                    cat_stats[c, k] = 0.0
            for i in range(start, end):
                r = idx[i]
                c = int(X[r, f])
                cat_cnt[c] += 1
                for k in range(ds):
                    cat_stats[c, k] += T[r, k]
            n_present = 0
            for c in range(K):
                if cat_cnt[c] > 0:
                    cat_order[n_present] = c
                    cat_scores[n_present] = _order_score(
                        cat_stats[c], cat_cnt[c], crit, lam, kstar
                    )
                    n_present += 1
            if n_present < 2:
                continue
            for a in range(1, n_present):
                sc = cat_scores[a]
                oc = cat_order[a]
                b = a - 1
                while b >= 0 and cat_scores[b] > sc:
                    cat_scores[b + 1] = cat_scores[b]
                    cat_order[b + 1] = cat_order[b]
                    b -= 1
                cat_scores[b + 1] = sc
                cat_order[b + 1] = oc
            for k in range(ds):
                left[k] = 0.0
            cl = 0
            mask = np.int64(0)
            for pos in range(n_present - 1):
                c = cat_order[pos]
                cl += cat_cnt[c]
                for k in range(ds):
                    left[k] += cat_stats[c, k]
                mask |= np.int64(1) << np.int64(c)
                cr = m - cl
                if cl < min_bucket or cr < min_bucket:
                    continue
                if crit == CRIT_BOOST:
                    if left[1] < min_child_weight or parent[1] - left[1] < min_child_weight:
                        continue
                sl = _side_score(left, cl, crit, lam)
                if crit == CRIT_BOOST:
                    right0 = parent[0] - left[0]
                    sr = right0 * right0 / (parent[1] - left[1] + lam)
                else:
                    sr = 0.0
                    for k in range(ds):
                        d = parent[k] - left[k]
                        sr += d * d
                    sr /= cr
                gain = sl + sr - parent_score
                if crit == CRIT_BOOST:
                    gain *= 0.5
                if gain > best_gain and gain > min_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.0
                    best_mask = mask

    return best_gain, best_feat, best_thr, best_mask


@njit(cache=True)
def grow_tree(
    X, T, ncats, rows, crit, mode,
    max_leaves, max_depth, min_bucket, min_node_size,
    min_child_weight, lam, min_gain, mtry, seed,
):
    """Grow one tree on X[rows]; returns packed node arrays.

    Output: (n_nodes, feature, threshold, catmask, left, right, n_samples,
    value). feature[i] == -1 marks a leaf. value rows hold class fractions
    (crit 0), the mean target (crit 1), or the Newton leaf value (crit 2).
    """
    np.random.seed(seed & 0x7FFFFFFF)
    n = rows.shape[0]
    p = X.shape[1]
    ds = T.shape[1]
    max_k = 1
    for j in range(p):
        if ncats[j] > max_k:
            max_k = ncats[j]

    if mode == MODE_FULL:
        cap = 2 * n + 1
    else:
        cap = 2 * max_leaves + 1

    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    catmask = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    n_samples = np.zeros(cap, dtype=np.int64)
    value = np.zeros((cap, ds))
    depth = np.zeros(cap, dtype=np.int64)

    node_start = np.zeros(cap, dtype=np.int64)
    node_end = np.zeros(cap, dtype=np.int64)
    node_gain = np.full(cap, _NO_SPLIT)
    node_feat = np.full(cap, -1, dtype=np.int64)
    node_thr = np.zeros(cap)
    node_mask = np.zeros(cap, dtype=np.int64)
    is_open = np.zeros(cap, dtype=np.uint8)

    idx = rows.copy()
    scratch = np.empty(n, dtype=np.int64)
    xv = np.empty(n)
    feat_buf = np.empty(p, dtype=np.int64)
    cat_stats = np.zeros((max_k, ds))
    cat_cnt = np.zeros(max_k, dtype=np.int64)
    cat_order = np.zeros(max_k, dtype=np.int64)
    cat_scores = np.zeros(max_k)

    node_start[0] = 0
    node_end[0] = n
    depth[0] = 0
    n_nodes = 1
    n_leaves = 1

    def _fill_value(node):
        s, e = node_start[node], node_end[node]
        m = e - s
        stats = np.zeros(ds)
        for i in range(s, e):
            r = idx[i]
            for k in range(ds):
                stats[k] += T[r, k]
        n_samples[node] = m
        if crit == CRIT_GINI:
            for k in range(ds):
                value[node, k] = stats[k] / m
        elif crit == CRIT_REG:
            value[node, 0] = stats[0] / m
        else:
            value[node, 0] = -stats[0] / (stats[1] + lam)

    def _search(node):
        s, e = node_start[node], node_end[node]
        m = e - s
        if m < min_node_size or m < 2 * min_bucket or depth[node] >= max_depth:
            node_feat[node] = -1
            node_gain[node] = _NO_SPLIT
            return
        g, f, thr, mask = _best_split_for_node(
            X, T, ncats, idx, s, e, feat_buf, mtry,
            crit, lam, min_bucket, min_child_weight, min_gain,
            xv, cat_stats, cat_cnt, cat_order, cat_scores,
        )
        node_gain[node] = g
        node_feat[node] = f
        node_thr[node] = thr
        node_mask[node] = mask

    def _partition(node):
        s, e = node_start[node], node_end[node]
        f = node_feat[node]
        thr = node_thr[node]
        mask = node_mask[node]
        cat = ncats[f] > 0
        nl = 0
        for i in range(s, e):
            r = idx[i]
            if cat:
                go_left = (mask >> np.int64(int(X[r, f]))) & np.int64(1)
            else:
                go_left = np.int64(1) if X[r, f] <= thr else np.int64(0)
            if go_left == 1:
                scratch[s + nl] = r
                nl += 1
        nr = 0
        for i in range(s, e):
            r = idx[i]
            if cat:
                go_left = (mask >> np.int64(int(X[r, f]))) & np.int64(1)
            else:
                go_left = np.int64(1) if X[r, f] <= thr else np.int64(0)
            if go_left == 0:
                scratch[s + nl + nr] = r
                nr += 1
        for i in range(s, e):
            idx[i] = scratch[i]
        return nl

    _fill_value(0)
    _search(0)
    is_open[0] = 1

    while True:
        pick = -1
        if mode == MODE_LEAFWISE:
            if n_leaves >= max_leaves:
                break
            best = min_gain
            for node in range(n_nodes):
                if is_open[node] == 1 and node_feat[node] >= 0 and node_gain[node] > best:
                    best = node_gain[node]
                    pick = node
            if pick < 0:
                break
        else:
            # FULL and DEPTHWISE both consume open nodes in creation order.
            if mode == MODE_DEPTHWISE and n_leaves >= max_leaves:
                break
            for node in range(n_nodes):
                if is_open[node] == 1:
                    if node_feat[node] >= 0:
                        pick = node
                        break
                    is_open[node] = 0
            if pick < 0:
                break

        is_open[pick] = 0
        nl = _partition(pick)
        s, e = node_start[pick], node_end[pick]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        node_start[lc], node_end[lc] = s, s + nl
        node_start[rc], node_end[rc] = s + nl, e
        depth[lc] = depth[pick] + 1
        depth[rc] = depth[pick] + 1
        feature[pick] = node_feat[pick]
        threshold[pick] = node_thr[pick]
        catmask[pick] = node_mask[pick]
        left[pick] = lc
        right[pick] = rc
        n_leaves += 1

        _fill_value(lc)
        _fill_value(rc)
        _search(lc)
        _search(rc)
        is_open[lc] = 1
        is_open[rc] = 1

    return (
        n_nodes,
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        catmask[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        n_samples[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True)
def apply_tree(feature, threshold, catmask, left, right, ncats, X):
    """Leaf index reached by each row of X."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            f = feature[node]
            if ncats[f] > 0:
                c = np.int64(int(X[i, f]))
                go_left = (catmask[node] >> c) & np.int64(1) if c < 63 else np.int64(0)
            else:
                go_left = np.int64(1) if X[i, f] <= threshold[node] else np.int64(0)
            node = left[node] if go_left == 1 else right[node]
        out[i] = node
    return out
