"""Acceptance suite: one PASS/FAIL line per headline criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even when output capture is on.
"""

import os
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

import oracles as o
from ponzitrace.accountfeat import ACCOUNT_REGISTRY
from ponzitrace.cli import main
from ponzitrace.evaluation import ExperimentPlan, evaluate, run_experiment2, run_experiment3
from ponzitrace.features import FEATURE_SETS, build_feature_table
from ponzitrace.ingest import assemble, parse_transactions, read_address_types, read_labels, refine_dataset
from ponzitrace.models import ModelConfig
from ponzitrace.sampling import SamplingWarning
from ponzitrace.synthgen import generate, make_corpus, random_params
from ponzitrace.tsbuild import SERIES_NAMES, build_panel
from ponzitrace.tsmeasure import MEASURES, TS_FEATURE_NAMES, compress_panel, measure_series

GBDT_LEAF = ModelConfig(kind="gbdt", growth="leaf_wise")
E2E_PLAN = ExperimentPlan(repeats=10, folds=0, seed=1)
REAL_CORPUS = os.environ.get("PONZITRACE_REAL_CORPUS", "")


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return report


@pytest.fixture(scope="module")
def e2e():
    t0 = time.perf_counter()
    corpus = make_corpus(48, 4, 4, 4, 940, seed=1)
    ds = refine_dataset(corpus.apps)
    table = build_feature_table(ds, "acc-ts", 24)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        report = evaluate(table, E2E_PLAN, GBDT_LEAF)
    return {"dataset": ds, "table": table, "report": report, "seconds": time.perf_counter() - t0}


def _natural_scales(x):
    """Magnitude each measure is bounded by, for values that are exactly 0.

    A zero true value (say the slope of a symmetric series) comes back as
    rounding noise from both sides, so error is taken relative to
    max(|a|, |b|, 1e-6 x natural scale).
    """
    norm = float(np.linalg.norm(x - x.mean()))
    var = float(np.var(x))
    tiny = 1e-6
    return {
        "mean": tiny * float(np.max(np.abs(x))),
        "var": tiny * var,
        "acf1": tiny,
        "linearity": tiny * norm,
        "curvature": tiny * norm,
        "trend": tiny,
        "season": tiny,
        "entropy": tiny,
        "lumpiness": tiny,
        "spikiness": tiny * var * var,
        "fspots": 0.0,
        "cpoints": 0.0,
    }


def test_measure_oracles(verdict):
    rng = np.random.default_rng(2024)
    loose = {"trend", "season", "entropy"}
    worst = {m: 0.0 for m in MEASURES}
    t0 = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(2, 501))
        x = o.random_series(rng, n)
        period = int(rng.choice([14, 7, 4]))
        got = measure_series(x, period)
        want = o.o_measures(list(map(float, x)), period)
        natural = _natural_scales(np.asarray(x, dtype=float))
        for name, a, b in zip(MEASURES, got, want):
            scale = max(abs(a), abs(b), natural[name])
            if scale:
                worst[name] = max(worst[name], abs(a - b) / scale)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60 and all(worst[m] <= (1e-6 if m in loose else 1e-9) for m in MEASURES)
    verdict("measure oracles", ok, f"max rel err {max(worst.values()):.2e}, {elapsed:.1f}s for 1000 series")


def test_dimensional_contract(verdict):
    widths = {k: reg.arity for k, reg in FEATURE_SETS.items()}
    panel = build_panel(generate(random_params("chain", 0)), 24)
    block = compress_panel(panel)
    structural = (
        panel.values.shape[1] == len(SERIES_NAMES)
        and block.shape == (panel.values.shape[1] * len(MEASURES),)
        and TS_FEATURE_NAMES == tuple(f"{s}__{m}" for s in SERIES_NAMES for m in MEASURES)
    )
    ok = (
        widths == {"acc": 29, "ts": 516, "acc-ts": 545}
        and len(SERIES_NAMES) == 43
        and len(MEASURES) == 12
        and structural
        and FEATURE_SETS["acc-ts"].names == ACCOUNT_REGISTRY.names + TS_FEATURE_NAMES
    )
    verdict("dimensional contract", ok, f"{widths}, ts = {len(SERIES_NAMES)} x {len(MEASURES)}")


def test_ingest_rules(verdict):
    import test_ingest as ti

    ti.test_failed_transactions_are_filtered()
    ti.test_refine_drops_zero_tx_and_short_lifetime()
    ti.test_failed_txs_can_cause_a_drop()
    ti.test_refinement_idempotent_fuzz()
    verdict("ingest rules", True, "failed-tx filter, zero-tx drop, <1 day drop, 500-corpus idempotence")


def test_smote_properties(verdict):
    import test_sampling as ts

    ts.test_ratio_convexity_and_originals()
    ts.test_danger_matches_oracle()
    ts.test_seeded_determinism()
    verdict("smote properties", True, "ratio +-1, convexity, DANGER oracle on 60 points, byte determinism")


def test_classifier_sanity(verdict):
    import test_models as tm

    from ponzitrace.models import GBDTClassifier, RandomForestClassifier

    tm.test_separable_training_fit(RandomForestClassifier(n_estimators=50))
    tm.test_separable_training_fit(GBDTClassifier(n_estimators=100))
    tm.test_training_loss_non_increasing()
    tm.test_single_tree_matches_cart_oracle()
    tm.test_knn_matches_oracle()
    verdict("classifier sanity", True, "separable F1 = 1, monotone loss, CART and KNN oracles")


def test_end_to_end(verdict, e2e):
    f1 = e2e["report"].mean["f1"]
    counts = e2e["dataset"].label_counts()
    ok = f1 >= 0.90 and e2e["seconds"] < 300 and counts == {"ponzi": 60, "non_ponzi": 940}
    verdict("end-to-end synthetic", ok, f"mean F1 {f1:.4f} over 10 repeats, {e2e['seconds']:.0f}s, {counts}")


def test_experiment3_recall(verdict, e2e):
    recalls = {}
    for holdout in ("tree", "handover", "waterfall", "all_three"):
        rep = run_experiment3(e2e["table"], E2E_PLAN, holdout, 0.5, GBDT_LEAF)
        recalls[holdout] = rep.mean["recall"]
    ok = all(r >= 0.80 for r in recalls.values())
    verdict("experiment 3 recall", ok, ", ".join(f"{k}={v:.3f}" for k, v in recalls.items()))


def test_experiment2_mechanism(verdict, e2e):
    table = e2e["table"]
    plan = ExperimentPlan(repeats=1, folds=0, seed=1)
    sweep = run_experiment2(table, plan, step=5, config=GBDT_LEAF)
    ks = [k for k, _, _ in sweep.curve]
    counts = dict(zip(table.names, sweep.counts))
    used = sweep.n_used
    nested = all(sweep.prefix(a) == sweep.prefix(b)[:a] for a, b in zip(ks, ks[1:]))
    zero_last = all(counts[n] > 0 for n in sweep.ranking[:used]) and all(
        counts[n] == 0 for n in sweep.ranking[used:]
    )
    refined = evaluate(table.select(sweep.prefix(sweep.best_k)), E2E_PLAN, GBDT_LEAF).mean["f1"]
    full = e2e["report"].mean["f1"]
    ok = ks == list(range(5, 546, 5)) and nested and zero_last and refined >= full - 0.01
    verdict(
        "experiment 2 mechanism",
        ok,
        f"{len(ks)} points, {used} features used, best k={sweep.best_k}, refined F1 {refined:.4f} vs full {full:.4f}",
    )


def test_cli_determinism(verdict, tmp_path):
    d = tmp_path
    small = ["--chain", "5", "--tree", "2", "--handover", "2", "--waterfall", "2", "--benign", "30"]
    quick = ["--repeats", "2", "--folds", "2", "--trees", "10"]
    runs = [
        ["synth", *small, "--out-dir", str(d / "raw")],
        ["ingest", "--txs", str(d / "raw/transactions.jsonl"), "--labels", str(d / "raw/labels.csv"),
         "--out", str(d / "ds.jsonl")],
        ["features", "--dataset", str(d / "ds.jsonl"), "--out", str(d / "f.csv")],
        ["eval", "--features", str(d / "f.csv"), *quick, "--out", str(d / "eval.json")],
        ["train", "--features", str(d / "f.csv"), "--model", "gbdt-level", "--trees", "10", "--out", str(d / "m.json")],
        ["experiment", "1", "--dataset", str(d / "ds.jsonl"), "--models", "knn", "--interval-hours", "24",
         "--repeats", "1", "--folds", "0", "--out-dir", str(d / "e1")],
        ["experiment", "3", "--features", str(d / "f.csv"), "--labels", str(d / "raw/labels.csv"),
         "--holdout", "tree", "--scam-rate", "0.5", *quick, "--out-dir", str(d / "e3")],
    ]
    manifests = [
        d / "raw/manifest.json", d / "ds.jsonl.manifest.json", d / "f.csv.manifest.json",
        d / "eval.json.manifest.json", d / "m.json.manifest.json", d / "e1/manifest.json", d / "e3/manifest.json",
    ]
    codes = [main(argv) for argv in runs]
    replays = [main(["rerun", str(m)]) for m in manifests]
    ok = codes == [0] * len(runs) and replays == [0] * len(runs)
    verdict("cli determinism", ok, f"{sum(c == 0 for c in replays)}/{len(runs)} commands reproduced byte-identically")


def _real_corpus_files():
    root = Path(REAL_CORPUS) if REAL_CORPUS else None
    if root is None or not root.is_dir():
        return None
    txs = next((p for p in (root / "transactions.jsonl", root / "transactions.csv") if p.exists()), None)
    labels = root / "labels.csv"
    if txs is None or not labels.exists():
        return None
    return txs, labels, root / "address_types.csv"


@pytest.mark.skipif(_real_corpus_files() is None, reason="real corpus not supplied (set PONZITRACE_REAL_CORPUS)")
def test_real_corpus_counts(verdict):
    txs, labels, types = _real_corpus_files()
    ds = assemble(parse_transactions(txs), read_labels(labels), read_address_types(types) if types.exists() else None)
    counts = ds.label_counts()
    verdict("real corpus counts", counts == {"ponzi": 79, "non_ponzi": 1182}, f"{counts}")
