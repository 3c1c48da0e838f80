import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import o_danger
from ponzitrace.sampling import BorderlineSMOTE, SamplingWarning, borderline_smote


def _imbalanced(seed, n_min=12, n_maj=120, f=4):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0.8, 1, size=(n_min, f)), rng.normal(0, 1, size=(n_maj, f))])
    y = np.r_[np.ones(n_min, int), np.zeros(n_maj, int)]
    return X, y


def _ring_toy():
    rng = np.random.default_rng(4)
    mino = rng.normal(0, 0.3, size=(10, 2))
    ang = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    r = np.where(np.arange(50) % 5 == 0, 0.6, 3.0)
    majo = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return np.vstack([mino, majo]), np.r_[np.ones(10, int), np.zeros(50, int)]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0]))
def test_ratio_convexity_and_originals(seed, ratio):
    X, y = _imbalanced(seed)
    s = BorderlineSMOTE(target_ratio=ratio, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        Xr, yr = s.fit_resample(X, y)
    n_maj = (yr == 0).sum()
    assert abs((yr == 1).sum() - ratio * n_maj) <= 1
    assert np.array_equal(Xr[: len(X)], X) and np.array_equal(yr[: len(y)], y)
    for row, (p, q, u) in zip(Xr[len(X):], s.pairs_):
        assert y[p] == 1 and y[q] == 1 and 0 <= u <= 1
        assert np.allclose(row, X[p] + u * (X[q] - X[p]), rtol=0, atol=1e-12)
        lo, hi = np.minimum(X[p], X[q]), np.maximum(X[p], X[q])
        assert np.all(row >= lo - 1e-12) and np.all(row <= hi + 1e-12)


def test_danger_matches_oracle():
    X, y = _ring_toy()
    s = BorderlineSMOTE(m_neighbors=10, k_neighbors=5)
    s.fit_resample(X, y)
    assert sorted(s.danger_.tolist()) == o_danger(X, y, 10)


@pytest.mark.parametrize("seed", range(5))
def test_danger_matches_oracle_random(seed):
    X, y = _imbalanced(seed)
    s = BorderlineSMOTE()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        s.fit_resample(X, y)
    assert sorted(s.danger_.tolist()) == o_danger(X, y, 10)


def test_seeded_determinism():
    X, y = _imbalanced(7)
    a = borderline_smote(X, y, seed=3)
    b = borderline_smote(X, y, seed=3)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
    c = borderline_smote(X, y, seed=4)
    assert c[0].tobytes() != a[0].tobytes()


def test_fallback_when_no_danger():
    # well separated clusters leave every minority row safe
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(10, 0.1, size=(20, 2)), rng.normal(0, 0.1, size=(100, 2))])
    y = np.r_[np.ones(20, int), np.zeros(100, int)]
    s = BorderlineSMOTE()
    with pytest.warns(SamplingWarning):
        Xr, yr = s.fit_resample(X, y)
    assert s.danger_.size == 0
    assert (yr == 1).sum() == 100
    assert {p for p, _, _ in s.pairs_} == set(range(20))


def test_too_few_minority_rows():
    X = np.arange(20.0).reshape(10, 2)
    y = np.r_[1, np.zeros(9, int)]
    with pytest.raises(ValueError):
        borderline_smote(X, y)


def test_balanced_is_noop():
    X = np.arange(20.0).reshape(10, 2)
    y = np.r_[np.ones(5, int), np.zeros(5, int)]
    Xr, yr = borderline_smote(X, y)
    assert np.array_equal(Xr, X) and np.array_equal(yr, y)
