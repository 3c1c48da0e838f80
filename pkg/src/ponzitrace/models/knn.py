"""k-nearest-neighbour classifier on z-scored features."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


def zscore_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard deviations; constant columns get scale 1."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def nearest_neighbors(train: np.ndarray, queries: np.ndarray, k: int, chunk: int = 64):
    """Indices of the ``k`` nearest rows of ``train`` for each query.

    Squared Euclidean distances are summed per row from coordinate
    differences; equal distances resolve to the lower row index.
    """
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start : start + chunk]
        d = ((train[None, :, :] - q[:, None, :]) ** 2).sum(axis=2)
        out[start : start + chunk] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


class KNNClassifier(ClassifierMixin, BaseEstimator):
    """Majority vote of the ``n_neighbors`` closest training rows.

    A tied vote counts as Ponzi.
    """

    def __init__(self, n_neighbors=5):
        self.n_neighbors = n_neighbors

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if not np.all(np.isin(y, (0, 1))):
            raise ValueError("labels must be 0 (non-Ponzi) or 1 (Ponzi)")
        if not 1 <= self.n_neighbors <= X.shape[0]:
            raise ValueError(
                f"n_neighbors={self.n_neighbors} must lie in [1, {X.shape[0]}] training rows"
            )
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.mean_, self.scale_ = zscore_stats(X)
        self.train_X_ = (X - self.mean_) / self.scale_
        self.train_y_ = y.astype(int)
        return self

    def kneighbors(self, X):
        check_is_fitted(self, "train_X_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return nearest_neighbors(self.train_X_, (X - self.mean_) / self.scale_, self.n_neighbors)

    def predict_proba(self, X):
        nb = self.kneighbors(X)
        p = self.train_y_[nb].mean(axis=1) if nb.size else np.empty(0)
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
