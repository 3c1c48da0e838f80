import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import f1_score

from oracles import count_splits, o_cart, o_knn_predict
from ponzitrace.models import (
    GBDTClassifier,
    KNNClassifier,
    ModelConfig,
    RandomForestClassifier,
    feature_importance,
    load_model,
    make_model,
    predict,
    save_model,
)
from ponzitrace.models.gbdt import logistic_loss, sigmoid


def _separable(n=500, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    return X, y


def _xor(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    return X, ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)


ALL = [
    lambda: KNNClassifier(5),
    lambda: RandomForestClassifier(n_estimators=20, random_state=1),
    lambda: GBDTClassifier(n_estimators=30, growth="leaf_wise"),
    lambda: GBDTClassifier(n_estimators=30, growth="level_wise"),
]


@pytest.mark.parametrize(
    "model",
    [RandomForestClassifier(n_estimators=50), GBDTClassifier(n_estimators=100), GBDTClassifier(growth="level_wise")],
)
def test_separable_training_fit(model):
    X, y = _separable()
    model.fit(X, y)
    assert f1_score(y, model.predict(X)) == 1.0


def test_training_loss_non_increasing():
    X, y = _separable(seed=3)
    y[::17] ^= 1
    m = GBDTClassifier(n_estimators=100).fit(X, y)
    loss = np.array(m.train_loss_)
    assert loss.shape == (101,)
    assert np.all(np.diff(loss) <= 1e-12)


def test_xor_stumps_near_chance():
    X, y = _xor()
    m = GBDTClassifier(n_estimators=1, growth="level_wise", max_depth=1, learning_rate=1.0).fit(X, y)
    assert abs((m.predict(X) == y).mean() - 0.5) < 0.1


def test_single_tree_matches_cart_oracle():
    rng = np.random.default_rng(5)
    X = np.round(rng.normal(size=(100, 3)), 1)
    y = (X[:, 0] * X[:, 1] + 0.3 * rng.normal(size=100) > 0).astype(int)
    Q = np.round(rng.normal(size=(200, 3)), 1)
    forest = RandomForestClassifier(n_estimators=1, bootstrap=False, max_features=None).fit(X, y)
    oracle = o_cart(X, y)
    assert np.array_equal(forest.predict(Q), oracle(Q))
    assert np.array_equal(forest.predict(X), oracle(X))


def test_knn_matches_oracle():
    rng = np.random.default_rng(6)
    X = np.round(rng.normal(size=(200, 3)) * [1, 10, 100], 1)
    y = (rng.random(200) < 0.3).astype(int)
    Q = np.round(rng.normal(size=(80, 3)) * [1, 10, 100], 1)
    for k in (1, 4, 5):
        got = KNNClassifier(k).fit(X, y).predict(Q)
        assert np.array_equal(got, o_knn_predict(X, y, Q, k))


def test_noise_labels_first_round():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(400, 3))
    y = np.r_[np.ones(200, int), np.zeros(200, int)]
    rng.shuffle(y)
    m = GBDTClassifier(n_estimators=1).fit(X, y)
    assert m.init_score_ == 0.0
    assert m.split_gains_[0].max() < 5.0


def test_hand_computed_newton_step():
    X = np.arange(10.0).reshape(-1, 1)
    y = np.r_[np.zeros(5, int), np.ones(5, int)]
    m = GBDTClassifier(n_estimators=1, growth="level_wise", max_depth=1, learning_rate=1.0).fit(X, y)
    # g = p - y = -+0.5, h = 0.25 per row; each child G = +-2.5, H = 1.25
    tree = m.estimators_[0]
    assert tree.threshold[0] == 4.5
    assert m.decision_function([[0.0], [9.0]]) == pytest.approx([-2.5 / 2.25, 2.5 / 2.25], rel=1e-12)
    assert m.split_gains_[0][0] == pytest.approx(0.5 * 2 * 6.25 / 2.25, rel=1e-12)
    assert m.train_loss_[0] == pytest.approx(np.log(2), rel=1e-12)


def test_knn_tie_goes_to_ponzi():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    y = np.array([1, 0, 1, 0])
    m = KNNClassifier(2).fit(X, y)
    assert m.predict([[0.5]])[0] == 1


def test_knn_bad_k():
    X = np.arange(6.0).reshape(3, 2)
    with pytest.raises(ValueError):
        KNNClassifier(4).fit(X, [0, 1, 0])
    with pytest.raises(ValueError):
        KNNClassifier(0).fit(X, [0, 1, 0])


def test_one_nn_recovers_training_labels():
    X, y = _separable(200, seed=8)
    assert np.array_equal(KNNClassifier(1).fit(X, y).predict(X), y)


def test_stump_importance_is_one_hot():
    X, y = _separable(seed=2)
    X = np.column_stack([X[:, 0] + X[:, 1], np.zeros(len(X)), X])
    m = GBDTClassifier(n_estimators=1, growth="level_wise", max_depth=1).fit(X, y)
    assert feature_importance(m).tolist() == [1, 0, 0, 0]


@pytest.mark.parametrize("make", ALL[1:])
def test_importance_sums_to_split_count(make):
    X, y = _separable(seed=9)
    m = make().fit(X, y)
    imp = feature_importance(m)
    assert imp.sum() == sum(count_splits(t) for t in m.estimators_)


def test_knn_has_no_importance():
    X, y = _separable(50)
    with pytest.raises(TypeError):
        feature_importance(KNNClassifier().fit(X, y))


@pytest.mark.parametrize(
    "make",
    [lambda: RandomForestClassifier(n_estimators=20, bootstrap=False, random_state=1), *ALL[2:]],
)
def test_monotone_transform_invariance(make):
    # split thresholds sit between observed values, so every fitted row keeps its side
    X, y = _separable(300, seed=4)
    X = X + 2
    Xt = np.column_stack([np.exp(X[:, 0]), X[:, 1] ** 3])
    a = make().fit(X, y).predict_proba(X)
    b = make().fit(Xt, y).predict_proba(Xt)
    assert np.allclose(a, b)


@pytest.mark.parametrize("make", ALL)
def test_serialization_round_trip(tmp_path, make):
    X, y = _xor(150, seed=1)
    m = make().fit(X, y)
    save_model(m, tmp_path / "m.json", feature_names=["a", "b"])
    back = load_model(tmp_path / "m.json")
    Q = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    assert np.array_equal(m.predict_proba(Q), back.predict_proba(Q))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 5), st.integers(2, 12))
def test_depth_and_leaf_limits(depth, leaves):
    X, y = _xor(200, seed=depth)
    lw = GBDTClassifier(n_estimators=3, growth="level_wise", max_depth=depth).fit(X, y)
    assert all(t.depth() <= depth for t in lw.estimators_)
    fw = GBDTClassifier(n_estimators=3, growth="leaf_wise", max_leaves=leaves).fit(X, y)
    assert all(t.n_splits + 1 <= leaves for t in fw.estimators_)
    rf = RandomForestClassifier(n_estimators=3, max_depth=depth).fit(X, y)
    assert all(t.depth() <= depth for t in rf.estimators_)


@pytest.mark.parametrize("make", ALL)
def test_empty_predict_and_label_score_agreement(make):
    X, y = _xor(120, seed=2)
    m = make().fit(X, y)
    labels, scores = predict(m, np.empty((0, 2)))
    assert labels.shape == (0,) and scores.shape == (0,)
    labels, scores = predict(m, X)
    assert np.all((scores >= 0) & (scores <= 1))
    assert np.array_equal(labels, (scores >= 0.5).astype(int))
    assert np.array_equal(labels, m.predict(X))


@pytest.mark.parametrize("kind", ["knn", "random_forest", "gbdt"])
def test_config_determinism(kind):
    X, y = _xor(150, seed=3)
    cfg = ModelConfig(kind=kind, trees=10, seed=11)
    a = make_model(cfg).fit(X, y).predict_proba(X)
    b = make_model(cfg).fit(X, y).predict_proba(X)
    assert a.tobytes() == b.tobytes()


def test_config_defaults():
    leaf = make_model(ModelConfig())
    level = make_model(ModelConfig(growth="level_wise"))
    assert (leaf.max_depth, leaf.max_leaves) == (-1, 31)
    assert level.max_depth == 6
    with pytest.raises(ValueError):
        ModelConfig(kind="svm")


def test_loss_helpers():
    assert sigmoid(0.0) == 0.5
    assert np.isfinite(sigmoid(np.array([-1000.0, 1000.0]))).all()
    assert logistic_loss(np.array([1.0, 0.0]), np.zeros(2)) == pytest.approx(np.log(2))
