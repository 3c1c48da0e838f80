import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ponzitrace import evaluation as ev
from ponzitrace.evaluation import (
    ConfusionCounts,
    ExperimentPlan,
    evaluate,
    holdout_members,
    metrics,
    negatives_for_rate,
    rank_features,
    run_experiment1,
    run_experiment2,
    run_experiment3,
    stratified_folds,
    stratified_split,
)
from ponzitrace.models import ModelConfig
from ponzitrace.sampling import BorderlineSMOTE

FAST = ModelConfig(kind="gbdt", trees=20)


def test_metric_example():
    m = metrics(ConfusionCounts(tp=2, fp=1, tn=6, fn=1))
    assert m["accuracy"] == pytest.approx(0.8)
    for k in ("precision", "recall", "f1"):
        assert m[k] == pytest.approx(2 / 3)


def test_perfect_and_degenerate():
    y = np.array([1, 0, 1, 0])
    assert metrics(ConfusionCounts.from_predictions(y, y)) == {
        "accuracy": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0,
    }
    m = metrics(ConfusionCounts.from_predictions(np.zeros(4, int), np.zeros(4, int)))
    assert (m["precision"], m["recall"], m["f1"]) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        metrics(ConfusionCounts(0, 0, 0, 0))


def test_split_example():
    y = np.r_[np.ones(6, int), np.zeros(94, int)]
    tr, te = stratified_split(y, 0.2, seed=0)
    assert te.size == 20 and y[te].sum() == 1
    assert np.array_equal(np.sort(np.r_[tr, te]), np.arange(100))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(2, 300), st.sampled_from([0.1, 0.2, 0.25, 0.5]), st.integers(0, 99))
def test_split_partition_and_determinism(n_pos, n_neg, f, seed):
    y = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
    tr, te = stratified_split(y, f, seed)
    assert np.intersect1d(tr, te).size == 0 and tr.size + te.size == y.size
    assert te.size == int(y.size * f + 1e-9)
    if n_pos != n_neg:
        small = int(n_pos > n_neg) ^ 1
        assert (y[te] == small).sum() == int(min(n_pos, n_neg) * f + 1e-9)
    tr2, te2 = stratified_split(y, f, seed)
    assert np.array_equal(te, te2) and np.array_equal(tr, tr2)


def test_folds_partition():
    y = np.r_[np.ones(11, int), np.zeros(50, int)]
    folds = stratified_folds(y, 5, seed=3)
    allidx = np.sort(np.concatenate(folds))
    assert np.array_equal(allidx, np.arange(61))
    assert all(2 <= y[f].sum() <= 3 for f in folds)
    with pytest.raises(ValueError):
        stratified_folds(np.r_[np.ones(3, int), np.zeros(20, int)], 5, 0)


def test_single_repeat_mean_equals_the_run(small_table):
    plan = ExperimentPlan(repeats=1, folds=0, seed=4)
    rep = evaluate(small_table, plan, FAST)
    only = rep.per_repeat[0]
    assert rep.mean == {k: only[k] for k in ev.METRIC_NAMES}
    assert json.loads(json.dumps(rep.to_dict()))["mean"] == rep.mean


def test_repeats_are_seeded(small_table):
    plan = ExperimentPlan(repeats=2, folds=0, seed=7)
    a = evaluate(small_table, plan, FAST).to_dict(timing=False)
    b = evaluate(small_table, plan, FAST).to_dict(timing=False)
    assert a == b
    assert [r["seed"] for r in a["per_repeat"]] == [7, 8]


def test_test_rows_never_oversampled(small_table, monkeypatch):
    seen = []
    original = BorderlineSMOTE.fit_resample

    def spy(self, X, y):
        seen.append({r.tobytes() for r in np.asarray(X)})
        return original(self, X, y)

    monkeypatch.setattr(BorderlineSMOTE, "fit_resample", spy)
    plan = ExperimentPlan(repeats=2, folds=3, seed=1)
    evaluate(small_table, plan, FAST)
    assert len(seen) == 2 * (3 + 1)
    for r in range(2):
        _, te = stratified_split(small_table.y, 0.2, 1 + r)
        test_rows = {small_table.X[i].tobytes() for i in te}
        for s in seen[4 * r : 4 * r + 4]:
            assert not (s & test_rows)


def test_cv_records_present(small_table):
    rep = evaluate(small_table, ExperimentPlan(repeats=1, folds=3, seed=0), FAST)
    cv = rep.per_repeat[0]["cv"]
    assert [f["fold"] for f in cv] == [0, 1, 2]


def test_negatives_for_rate():
    assert negatives_for_rate(4, 0.5) == 4
    assert negatives_for_rate(4, 1.0) == 0
    assert [negatives_for_rate(n, r) for n, r in ((4, 0.05), (4, 0.06), (12, 0.1))] == [76, 62, 108]
    with pytest.raises(ValueError):
        negatives_for_rate(4, 0)


def test_holdout_rules():
    assert holdout_members("all_three") == ("tree", "handover", "waterfall")
    with pytest.raises(ValueError, match="chain"):
        holdout_members("chain")
    with pytest.raises(ValueError):
        holdout_members("pyramid")


def test_experiment3_composition(small_table):
    plan = ExperimentPlan(repeats=1, folds=0, seed=0)
    rep = run_experiment3(small_table, plan, "tree", 0.5, FAST)
    assert rep.plan["n_holdout"] == 4 and rep.plan["n_negatives"] == 4
    assert rep.per_repeat[0]["n_test"] == 8
    rep = run_experiment3(small_table, plan, "waterfall", 1.0, FAST)
    c = rep.per_repeat[0]["counts"]
    assert c["fp"] == 0 and c["tn"] == 0
    assert rep.per_repeat[0]["precision"] == (1.0 if c["tp"] else 0.0)


def test_experiment3_needs_types(small_table):
    from dataclasses import replace

    untyped = replace(small_table, ponzi_types=(None,) * len(small_table.addresses))
    with pytest.raises(ValueError, match="types"):
        run_experiment3(untyped, ExperimentPlan(repeats=1, folds=0), "tree", 0.5, FAST)


def test_rank_features_stable():
    assert rank_features(["a", "b", "c", "d"], [1, 3, 1, 0]) == ["b", "a", "c", "d"]


def test_experiment2_prefixes(small_table):
    plan = ExperimentPlan(repeats=1, folds=0, seed=0)
    F = small_table.n_features
    sweep = run_experiment2(small_table, plan, config=FAST, ks=[5, 10, F])
    assert [k for k, _, _ in sweep.curve] == [5, 10, F]
    assert sweep.prefix(5) == sweep.prefix(10)[:5]
    counts = dict(zip(small_table.names, sweep.counts))
    used = sweep.n_used
    assert all(counts[n] > 0 for n in sweep.ranking[:used])
    assert all(counts[n] == 0 for n in sweep.ranking[used:])
    full = evaluate(small_table, plan, FAST).mean["f1"]
    assert sweep.curve[-1][1] == full
    assert sweep.best_k in (5, 10, F)
    best = max(f for _, f, _ in sweep.curve)
    assert dict((k, f) for k, f, _ in sweep.curve)[sweep.best_k] == best
    comp = sweep.composition(10)
    assert comp["account"] + comp["timeseries"] == 10


def test_experiment2_rejects_knn(small_table):
    with pytest.raises(ValueError):
        run_experiment2(small_table, ExperimentPlan(repeats=1, folds=0), config=ModelConfig(kind="knn"))


def test_experiment1_arms(small_dataset, small_table):
    plan = ExperimentPlan(repeats=1, folds=0, models=(FAST, ModelConfig(kind="knn")))
    rows = run_experiment1({24: small_table, 48: small_table}, plan, intervals=(24, 48))
    arms = [(r["feature_set"], r["interval_hours"], r["model"]) for r in rows]
    assert ("acc", None, "knn") in arms and ("acc", 48, "knn") not in arms
    assert len(rows) == 2 * (1 + 2 + 2)
    widths = {r["feature_set"]: r["n_features"] for r in rows}
    assert widths == {"acc": 29, "ts": 516, "acc-ts": 545}


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan(repeats=0)
    with pytest.raises(ValueError):
        ExperimentPlan(folds=1)
    with pytest.raises(ValueError):
        ExperimentPlan(test_fraction=1.0)
