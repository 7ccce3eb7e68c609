"""Numba kernels for regression-tree growing and traversal.

The grower is deterministic: all randomness (the per-split feature
subsample) comes from a pre-generated integer pool drawn outside the
kernel from a numpy Generator, so results are independent of threading
or compilation details. Split search follows greedy variance reduction
with thresholds at midpoints of sorted unique values; ties are broken
in favor of the lowest feature index, then the lowest threshold, by
scanning candidates in ascending order and requiring strict improvement.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def grow_tree(X, y, mtry, min_node_size, max_depth, feat_pool):
    """Grow one regression tree.

    Args:
        X: (n, p) float64 training matrix.
        y: (n,) float64 targets.
        mtry: number of candidate features per split (== p disables subsampling).
        min_node_size: minimum observations in each child.
        max_depth: depth cap, -1 for unlimited.
        feat_pool: (n_rows, mtry) int64 randomness for feature subsampling;
            row t feeds the t-th split attempt. Unused when mtry == p.

    Returns:
        (feat, thr, left, right, value) arrays; feat < 0 marks leaves.
    """
    n, p = X.shape
    max_nodes = 2 * n + 1
    feat = np.full(max_nodes, -1, np.int64)
    thr = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes, np.float64)

    idx = np.arange(n)
    stack_start = np.empty(max_nodes, np.int64)
    stack_end = np.empty(max_nodes, np.int64)
    stack_depth = np.empty(max_nodes, np.int64)
    stack_node = np.empty(max_nodes, np.int64)
    n_nodes = 1
    sp = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    stack_node[0] = 0
    n_attempts = 0
    featset = np.empty(p, np.int64)

    while sp >= 0:
        s = stack_start[sp]
        e = stack_end[sp]
        depth = stack_depth[sp]
        node = stack_node[sp]
        sp -= 1
        m = e - s
        ysum = 0.0
        yss = 0.0
        for i in range(s, e):
            yi = y[idx[i]]
            ysum += yi
            yss += yi * yi
        value[node] = ysum / m
        if max_depth >= 0 and depth >= max_depth:
            continue
        if m < 2 * min_node_size:
            continue
        parent_sse = yss - ysum * ysum / m
        if parent_sse <= 0.0:
            continue

        for j in range(p):
            featset[j] = j
        if mtry < p:
            for k in range(mtry):
                j = k + feat_pool[n_attempts, k] % (p - k)
                tmp = featset[k]
                featset[k] = featset[j]
                featset[j] = tmp
            cand = np.sort(featset[:mtry])
        else:
            cand = featset
        n_attempts += 1

        best_gain = 0.0
        best_f = -1
        best_t = 0.0
        v = np.empty(m, np.float64)
        yn = np.empty(m, np.float64)
        n_cand = mtry if mtry < p else p
        for cf in range(n_cand):
            f = cand[cf]
            for i in range(m):
                v[i] = X[idx[s + i], f]
                yn[i] = y[idx[s + i]]
            order = np.argsort(v, kind="mergesort")
            c1 = 0.0
            c2 = 0.0
            for i in range(m - 1):
                o = order[i]
                c1 += yn[o]
                c2 += yn[o] * yn[o]
                nl = i + 1
                nr = m - nl
                if nl < min_node_size or nr < min_node_size:
                    continue
                vi = v[o]
                vj = v[order[i + 1]]
                if vi >= vj:
                    continue
                sse_l = c2 - c1 * c1 / nl
                sr = ysum - c1
                sse_r = (yss - c2) - sr * sr / nr
                gain = parent_sse - sse_l - sse_r
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_t = 0.5 * (vi + vj)
        if best_f < 0:
            continue

        feat[node] = best_f
        thr[node] = best_t
        nl = 0
        for i in range(s, e):
            if X[idx[i], best_f] <= best_t:
                nl += 1
        out = np.empty(m, np.int64)
        li = 0
        ri = 0
        for i in range(s, e):
            if X[idx[i], best_f] <= best_t:
                out[li] = idx[i]
                li += 1
            else:
                out[nl + ri] = idx[i]
                ri += 1
        for i in range(m):
            idx[s + i] = out[i]

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        sp += 1
        stack_start[sp] = s
        stack_end[sp] = s + nl
        stack_depth[sp] = depth + 1
        stack_node[sp] = lnode
        sp += 1
        stack_start[sp] = s + nl
        stack_end[sp] = e
        stack_depth[sp] = depth + 1
        stack_node[sp] = rnode

    return (feat[:n_nodes], thr[:n_nodes], left[:n_nodes],
            right[:n_nodes], value[:n_nodes])


@njit(cache=True, nogil=True)
def predict_tree(feat, thr, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n, np.float64)
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
