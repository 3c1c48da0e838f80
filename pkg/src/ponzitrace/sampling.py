"""Borderline-SMOTE oversampling of the minority class."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_X_y

from .models.knn import zscore_stats


class SamplingWarning(UserWarning):
    pass


def _neighbors_excluding_self(Z: np.ndarray, queries: np.ndarray, pool: np.ndarray, k: int):
    """For each row id in ``queries``, the ``k`` closest ids in ``pool``.

    The query row itself is excluded; equal distances go to the lower id.
    """
    P = Z[pool]
    chunk = max(1, (1 << 22) // max(1, P.size))
    out = np.empty((queries.size, k), dtype=np.int64)
    for s in range(0, queries.size, chunk):
        q = queries[s : s + chunk]
        d = ((P[None, :, :] - Z[q][:, None, :]) ** 2).sum(axis=2)
        d[pool[None, :] == q[:, None]] = np.inf
        out[s : s + chunk] = pool[np.argsort(d, axis=1, kind="stable")[:, :k]]
    return out


class BorderlineSMOTE(BaseEstimator):
    """Borderline-SMOTE-1.

    A minority row is in DANGER when at least half, but not all, of its
    ``m_neighbors`` nearest rows (any class) are majority rows. Synthetic
    rows ``p + u (q - p)`` are drawn round-robin over the DANGER rows, with
    ``q`` one of ``p``'s ``k_neighbors`` nearest minority rows and
    ``u ~ U(0, 1)``, until minority/majority reaches ``target_ratio``.
    Neighbours are found on z-scored features; synthesis happens on the
    raw values. With no DANGER rows every minority row is used instead and
    a :class:`SamplingWarning` is emitted.

    Attributes set by ``fit_resample``: ``minority_label_``, ``danger_``
    (row ids), ``noise_`` (row ids), ``pairs_`` (``(p, q, u)`` per
    synthetic row).
    """

    def __init__(self, m_neighbors=10, k_neighbors=5, target_ratio=1.0, random_state=0):
        self.m_neighbors = m_neighbors
        self.k_neighbors = k_neighbors
        self.target_ratio = target_ratio
        self.random_state = random_state

    def fit_resample(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y)
        if self.m_neighbors < 1 or self.k_neighbors < 1:
            raise ValueError("m_neighbors and k_neighbors must be positive")
        if self.target_ratio <= 0:
            raise ValueError("target_ratio must be positive")
        labels, counts = np.unique(y, return_counts=True)
        if labels.size != 2:
            raise ValueError("oversampling needs exactly two classes")
        minority = labels[np.argmin(counts)] if counts[0] != counts[1] else labels[1]
        self.minority_label_ = minority
        mino = np.flatnonzero(y == minority)
        majo = np.flatnonzero(y != minority)
        if mino.size < 2:
            raise ValueError("need at least two minority rows to oversample")
        n_new = int(round(self.target_ratio * majo.size)) - mino.size
        self.pairs_ = []
        self.danger_ = np.empty(0, dtype=np.int64)
        self.noise_ = np.empty(0, dtype=np.int64)
        if n_new <= 0:
            return X.copy(), y.copy()

        mean, scale = zscore_stats(X)
        Z = (X - mean) / scale
        everyone = np.arange(X.shape[0])
        m = min(self.m_neighbors, X.shape[0] - 1)
        nb = _neighbors_excluding_self(Z, mino, everyone, m)
        n_major = (y[nb] != minority).sum(axis=1)
        danger = (n_major * 2 >= m) & (n_major < m)
        self.danger_ = mino[danger]
        self.noise_ = mino[n_major == m]
        seeds = self.danger_
        if seeds.size == 0:
            warnings.warn(
                "no minority row is in DANGER; falling back to plain SMOTE",
                SamplingWarning,
                stacklevel=2,
            )
            seeds = mino
        k = min(self.k_neighbors, mino.size - 1)
        knn = _neighbors_excluding_self(Z, seeds, mino, k)

        rng = np.random.default_rng(self.random_state)
        synth = np.empty((n_new, X.shape[1]))
        for i in range(n_new):
            j = i % seeds.size
            p = seeds[j]
            q = knn[j, rng.integers(k)]
            u = rng.random()
            synth[i] = X[p] + u * (X[q] - X[p])
            self.pairs_.append((int(p), int(q), float(u)))
        X_out = np.vstack([X, synth])
        y_out = np.concatenate([y, np.full(n_new, minority, dtype=y.dtype)])
        return X_out, y_out


def borderline_smote(X, y, m=10, k=5, target_ratio=1.0, seed=0):
    return BorderlineSMOTE(m, k, target_ratio, seed).fit_resample(X, y)
