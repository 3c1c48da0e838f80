"""Binary decision trees: array storage, CART classification, random forest."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


class TreeArrays:
    """Flat node arrays; ``feature == -1`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go left.
    """

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    def set_split(self, node: int, feature: int, threshold: float, left: int, right: int):
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right

    def freeze(self) -> "Tree":
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=float),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=float),
        )


class Tree:
    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(self.feature >= 0))

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] >= 0:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
            else:
                best = max(best, d)
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=float),
        )


def _best_gini_split(X, y, rows, features, min_samples_leaf):
    """Best split of ``rows`` over ``features`` by weighted Gini impurity.

    Maximizes ``sum_k cL_k^2 / nL + sum_k cR_k^2 / nR``, which is equivalent
    to minimizing the size-weighted child impurity. Returns
    ``(feature, threshold)`` or ``None``; ties go to the earlier feature in
    ``features`` and then to the lower threshold.
    """
    m = rows.size
    if m < 2 * min_samples_leaf:
        return None
    sub = X[np.ix_(rows, features)]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[rows][order]
    pos_left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, m)[:, None]
    n_right = m - n_left
    neg_left = n_left - pos_left
    pos_right = ys.sum(axis=0) - pos_left
    neg_right = n_right - pos_right
    score = (pos_left * pos_left + neg_left * neg_left) / n_left + (
        pos_right * pos_right + neg_right * neg_right
    ) / n_right
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score.T))
    j, i = divmod(flat, m - 1)
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = 0.5 * (lo + hi)
    if thr >= hi:
        thr = lo
    return int(features[j]), float(thr)


def grow_cart(X, y, rows, max_depth=None, min_samples_leaf=1, max_features=None, rng=None):
    """Grow a Gini classification tree on ``rows`` (duplicates allowed).

    Leaves store the fraction of class-1 rows. With ``max_features`` set,
    each node draws that many candidate features without replacement and
    keeps drawing further batches if none of them can split the node.
    """
    n_features = X.shape[1]
    tree = TreeArrays()
    stack = [(tree.add(y[rows].mean()), rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        pos = int(y[idx].sum())
        if pos in (0, idx.size) or (max_depth is not None and depth >= max_depth):
            continue
        if max_features is None or max_features >= n_features:
            batches = [np.arange(n_features)]
        else:
            perm = rng.permutation(n_features)
            batches = [np.sort(perm[i : i + max_features]) for i in range(0, n_features, max_features)]
        split = None
        for feats in batches:
            split = _best_gini_split(X, y, idx, feats, min_samples_leaf)
            if split is not None:
                break
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        left = tree.add(y[li].mean())
        right = tree.add(y[ri].mean())
        tree.set_split(node, f, thr, left, right)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return tree.freeze()


def _check_binary(y):
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0, 1))):
        raise ValueError("labels must be 0 (non-Ponzi) or 1 (Ponzi)")
    return classes


class DecisionTreeClassifier(ClassifierMixin, BaseEstimator):
    """Single CART tree with Gini splits on midpoints of sorted unique values."""

    def __init__(self, max_depth=None, min_samples_leaf=1):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        y = y.astype(int)
        self.classes_ = np.array([0, 1])
        _check_binary(y)
        self.n_features_in_ = X.shape[1]
        self.tree_ = grow_cart(X, y, np.arange(X.shape[0]), self.max_depth, self.min_samples_leaf)
        self.split_counts_ = np.bincount(
            self.tree_.feature[self.tree_.feature >= 0], minlength=self.n_features_in_
        )
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        p = self.tree_.predict(X)
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


class RandomForestClassifier(ClassifierMixin, BaseEstimator):
    """Bagged CART trees with per-split feature subsampling; majority vote.

    ``predict_proba`` reports the fraction of trees voting Ponzi, and a tied
    vote counts as Ponzi.
    """

    def __init__(
        self,
        n_estimators=100,
        max_depth=None,
        min_samples_leaf=1,
        max_features="sqrt",
        bootstrap=True,
        random_state=0,
    ):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _n_candidates(self, n_features):
        if self.max_features in (None, "all"):
            return None
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        return int(self.max_features)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        y = y.astype(int)
        if np.unique(y).size < 2:
            raise ValueError("random forest needs both classes in the training data")
        _check_binary(y)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be positive")
        self.classes_ = np.array([0, 1])
        n, f = X.shape
        self.n_features_in_ = f
        k = self._n_candidates(f)
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_estimators)
        self.estimators_ = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            self.estimators_.append(
                grow_cart(X, y, rows, self.max_depth, self.min_samples_leaf, k, rng)
            )
        feats = np.concatenate([t.feature[t.feature >= 0] for t in self.estimators_])
        self.split_counts_ = np.bincount(feats, minlength=f)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        votes = np.zeros(X.shape[0])
        for tree in self.estimators_:
            votes += tree.predict(X) >= 0.5
        p = votes / len(self.estimators_)
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
