"""Exact split search kernels for second-order gradient trees.

A node keeps, for every active feature, its row ids and values sorted by
that feature (shape ``(n_features, n_rows)``). Splitting a node partitions
these arrays stably, so children stay sorted without re-sorting.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def node_sums(rows, g, h):
    G = 0.0
    H = 0.0
    for i in range(rows.shape[0]):
        G += g[rows[i]]
        H += h[rows[i]]
    return G, H


@njit(cache=True)
def best_split(rows, vals, g, h, G, H, reg_lambda, min_child_weight, min_samples_leaf):
    """Best (gain, feature, threshold) over all sorted columns.

    Gain is half the reduction in the regularized second-order loss; only
    strictly positive gains are reported (feature -1 otherwise). Earlier
    features and lower thresholds win ties.
    """
    n_feat, m = rows.shape
    parent = G * G / (H + reg_lambda)
    best = 0.0
    best_f = -1
    best_t = 0.0
    for f in range(n_feat):
        gl = 0.0
        hl = 0.0
        for i in range(m - 1):
            r = rows[f, i]
            gl += g[r]
            hl += h[r]
            v = vals[f, i]
            vn = vals[f, i + 1]
            if vn <= v:
                continue
            if i + 1 < min_samples_leaf or m - i - 1 < min_samples_leaf:
                continue
            hr = H - hl
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gr = G - gl
            gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent
            if gain > best:
                best = gain
                best_f = f
                t = 0.5 * (v + vn)
                best_t = t if t < vn else v
    return 0.5 * best, best_f, best_t


@njit(cache=True)
def partition(rows, vals, go_left, n_left):
    n_feat, m = rows.shape
    lr = np.empty((n_feat, n_left), dtype=rows.dtype)
    lv = np.empty((n_feat, n_left), dtype=vals.dtype)
    rr = np.empty((n_feat, m - n_left), dtype=rows.dtype)
    rv = np.empty((n_feat, m - n_left), dtype=vals.dtype)
    for f in range(n_feat):
        li = 0
        ri = 0
        for i in range(m):
            r = rows[f, i]
            if go_left[r]:
                lr[f, li] = r
                lv[f, li] = vals[f, i]
                li += 1
            else:
                rr[f, ri] = r
                rv[f, ri] = vals[f, i]
                ri += 1
    return lr, lv, rr, rv


def presort(X: np.ndarray, features: np.ndarray):
    """Row ids and values of ``X[:, features]``, each column sorted."""
    sub = X[:, features]
    order = np.argsort(sub, axis=0, kind="stable")
    vals = np.take_along_axis(sub, order, axis=0)
    return np.ascontiguousarray(order.T.astype(np.int64)), np.ascontiguousarray(vals.T)
