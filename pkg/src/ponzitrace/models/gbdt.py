"""Gradient-boosted decision trees for binary classification.

Logistic loss with second-order (Newton) leaf values. Trees grow either
level-wise (every splittable node of a depth is expanded before the next
depth) or leaf-wise (always the leaf with the largest gain). Split search is
exact over presorted columns.
"""

from __future__ import annotations

import heapq

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._splitting import best_split, node_sums, partition, presort
from .tree import Tree, TreeArrays

GROWTH = ("level_wise", "leaf_wise")


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(y, raw) -> float:
    """Mean negative log-likelihood for raw scores ``raw``."""
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


class _Node:
    __slots__ = ("idx", "rows", "vals", "depth", "G", "H", "gain", "feature", "threshold")


class GBDTClassifier(ClassifierMixin, BaseEstimator):
    """Boosted regression trees on logistic-loss gradients.

    Parameters
    ----------
    n_estimators : int
        Boosting rounds.
    learning_rate : float
        Shrinkage applied to every leaf value, in (0, 1].
    growth : {"level_wise", "leaf_wise"}
    max_depth : int
        Depth limit; ``-1`` means unlimited (useful with leaf-wise growth).
        ``None`` picks 6 for level-wise and unlimited for leaf-wise.
    max_leaves : int or None
        Leaf limit for leaf-wise growth (default 31). Ignored level-wise.
    reg_lambda : float
        L2 penalty on leaf values.
    min_child_weight : float
        Minimum hessian sum in a child.
    min_split_gain : float
        A split is taken only if its gain is strictly above this.
    """

    def __init__(
        self,
        n_estimators=100,
        learning_rate=0.1,
        growth="leaf_wise",
        max_depth=None,
        max_leaves=None,
        reg_lambda=1.0,
        min_child_weight=1e-3,
        min_samples_leaf=1,
        min_split_gain=0.0,
        random_state=0,
    ):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.growth = growth
        self.max_depth = max_depth
        self.max_leaves = max_leaves
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.min_samples_leaf = min_samples_leaf
        self.min_split_gain = min_split_gain
        self.random_state = random_state

    def _limits(self):
        if self.growth not in GROWTH:
            raise ValueError(f"growth must be one of {GROWTH}, got {self.growth!r}")
        depth = self.max_depth
        if depth is None:
            depth = 6 if self.growth == "level_wise" else -1
        leaves = self.max_leaves
        if self.growth == "leaf_wise" and leaves is None:
            leaves = 31
        if self.growth == "level_wise":
            leaves = None
        if depth == 0 or depth < -1:
            raise ValueError("max_depth must be positive or -1")
        if leaves is not None and leaves < 2:
            raise ValueError("max_leaves must be at least 2")
        return (np.inf if depth == -1 else depth), leaves

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(float)
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("labels must be 0 (non-Ponzi) or 1 (Ponzi)")
        if np.unique(y).size < 2:
            raise ValueError("gradient boosting needs both classes in the training data")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be positive")
        max_depth, max_leaves = self._limits()

        n, f = X.shape
        self.n_features_in_ = f
        self.classes_ = np.array([0, 1])
        base = y.mean()
        self.init_score_ = float(np.log(base / (1 - base)))
        active = np.flatnonzero(np.ptp(X, axis=0) > 0) if n else np.arange(0)
        rows0, vals0 = presort(X, active)

        raw = np.full(n, self.init_score_)
        self.estimators_: list[Tree] = []
        self.split_gains_: list[np.ndarray] = []
        self.train_loss_ = [logistic_loss(y, raw)]
        go_left = np.zeros(n, dtype=np.bool_)
        for _ in range(self.n_estimators):
            p = sigmoid(raw)
            g = p - y
            h = p * (1 - p)
            tree, gains = self._grow(X, g, h, active, rows0, vals0, go_left, max_depth, max_leaves)
            raw += tree.predict(X)
            self.estimators_.append(tree)
            self.split_gains_.append(gains)
            self.train_loss_.append(logistic_loss(y, raw))
        feats = [t.feature[t.feature >= 0] for t in self.estimators_]
        self.split_counts_ = np.bincount(np.concatenate(feats), minlength=f)
        return self

    def _grow(self, X, g, h, active, rows0, vals0, go_left, max_depth, max_leaves):
        lam = float(self.reg_lambda)
        mcw = float(self.min_child_weight)
        msl = int(self.min_samples_leaf)
        lr = float(self.learning_rate)
        tree = TreeArrays()
        gains = []

        def make(rows, vals, depth):
            node = _Node()
            node.rows, node.vals, node.depth = rows, vals, depth
            node.G, node.H = node_sums(rows[0], g, h)
            node.idx = tree.add(-lr * node.G / (node.H + lam))
            node.gain, node.feature, node.threshold = 0.0, -1, 0.0
            if depth < max_depth and rows.shape[1] > 1:
                gain, bf, bt = best_split(rows, vals, g, h, node.G, node.H, lam, mcw, msl)
                if bf >= 0 and gain > self.min_split_gain:
                    node.gain, node.feature, node.threshold = gain, int(active[bf]), bt
            return node

        def split(node):
            rows = node.rows[0]
            mask = X[rows, node.feature] <= node.threshold
            go_left[rows] = mask
            n_left = int(mask.sum())
            lr_, lv, rr, rv = partition(node.rows, node.vals, go_left, n_left)
            go_left[rows] = False
            left = make(lr_, lv, node.depth + 1)
            right = make(rr, rv, node.depth + 1)
            tree.set_split(node.idx, node.feature, node.threshold, left.idx, right.idx)
            gains.append(node.gain)
            node.rows = node.vals = None
            return left, right

        if rows0.shape[0] == 0:
            # every feature constant: a single leaf over all rows
            G, H = float(g.sum()), float(h.sum())
            tree.add(-lr * G / (H + lam))
            return tree.freeze(), np.array([])

        root = make(rows0, vals0, 0)
        if self.growth == "level_wise":
            frontier = [root]
            while frontier:
                nxt = []
                for node in frontier:
                    if node.feature >= 0:
                        nxt.extend(split(node))
                    node.rows = node.vals = None
                frontier = nxt
        else:
            heap, n_leaves, order = [], 1, 0
            if root.feature >= 0:
                heap.append((-root.gain, order, root))
            while heap and n_leaves < max_leaves:
                _, _, node = heapq.heappop(heap)
                for child in split(node):
                    if child.feature >= 0:
                        order += 1
                        heapq.heappush(heap, (-child.gain, order, child))
                n_leaves += 1
        return tree.freeze(), np.array(gains)

    def decision_function(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        raw = np.full(X.shape[0], self.init_score_)
        for tree in self.estimators_:
            raw += tree.predict(X)
        return raw

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
