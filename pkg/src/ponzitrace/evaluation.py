"""Metrics, splitting, cross-validation and the three experiments.

Every experiment follows the same repeat protocol: a stratified train/test
split, Borderline-SMOTE on the training part only, a fit on the oversampled
training rows and metrics on the untouched test rows. Repeat ``r`` uses seed
``plan.seed + r`` for the split, the sampler and the model.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .features import FEATURE_SETS, FeatureTable, build_feature_table
from .accountfeat import ACCOUNT_REGISTRY
from .ingest import PONZI_TYPES
from .models import ModelConfig, feature_importance, make_model
from .sampling import BorderlineSMOTE

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")
HOLDOUT_TYPES = ("tree", "handover", "waterfall", "all_three")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionCounts":
        t = np.asarray(y_true).astype(bool)
        p = np.asarray(y_pred).astype(bool)
        if t.shape != p.shape:
            raise ValueError("label and prediction lengths differ")
        return cls(
            int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p))
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def as_dict(self) -> dict:
        return asdict(self)


def metrics(c: ConfusionCounts) -> dict:
    """Accuracy, precision, recall and F1; zero-denominator ratios are 0."""
    if c.total == 0:
        raise ValueError("metrics need at least one test row")
    acc = (c.tp + c.tn) / c.total
    prec = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    rec = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return {"accuracy": acc, "precision": prec, "recall": rec, "f1": f1}


def _exact(x) -> Fraction:
    # decimal reading of the float, so 0.2 * 30 is exactly 6
    return Fraction(repr(float(x)))


def stratified_split(y, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Train and test row indices, both sorted.

    The test set holds ``floor(n * f)`` rows. Every class except the
    largest contributes ``floor(n_c * f)`` of them and the largest class
    fills the rest, so rounding never takes minority rows from training.
    """
    y = np.asarray(y)
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    labels, counts = np.unique(y, return_counts=True)
    if labels.size < 2 or counts.min() < 2:
        raise ValueError("each class needs at least two rows for a stratified split")
    f = _exact(test_fraction)
    n_test = math.floor(y.size * f)
    largest = int(np.argmax(counts))
    take = [math.floor(int(c) * f) for c in counts]
    take[largest] = n_test - (sum(take) - take[largest])
    rng = np.random.default_rng(seed)
    test = []
    for lab, t in zip(labels, take):
        idx = rng.permutation(np.flatnonzero(y == lab))
        test.append(idx[:t])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(y.size), test)
    return train, test


def stratified_folds(y, folds: int, seed: int) -> list[np.ndarray]:
    """Validation index sets of a stratified k-fold partition."""
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("folds must be at least 2")
    labels, counts = np.unique(y, return_counts=True)
    if folds > counts.min():
        raise ValueError(f"folds={folds} exceeds the smallest class size {counts.min()}")
    rng = np.random.default_rng(seed)
    assign = np.empty(y.size, dtype=np.int64)
    for lab in labels:
        idx = rng.permutation(np.flatnonzero(y == lab))
        assign[idx] = np.arange(idx.size) % folds
    return [np.flatnonzero(assign == k) for k in range(folds)]


def _fit_predict(X_tr, y_tr, X_te, config: ModelConfig, seed: int, sampler_params: dict):
    sampler = BorderlineSMOTE(random_state=seed, **sampler_params)
    Xs, ys = sampler.fit_resample(X_tr, y_tr)
    model = make_model(config.with_seed(seed)).fit(Xs, ys)
    return model, model.predict(X_te), Xs.shape[0]


def kfold_cv(X, y, folds: int, config: ModelConfig, seed: int, sampler_params=None) -> list[dict]:
    """Per-fold validation metrics; each training fold is oversampled alone."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    out = []
    for k, val in enumerate(stratified_folds(y, folds, seed)):
        tr = np.setdiff1d(np.arange(y.size), val)
        _, pred, _ = _fit_predict(X[tr], y[tr], X[val], config, seed + k, sampler_params or {})
        c = ConfusionCounts.from_predictions(y[val], pred)
        out.append({"fold": k, "counts": c.as_dict(), **metrics(c)})
    return out


@dataclass
class ExperimentPlan:
    """What to run and how often.

    ``folds`` of 0 skips the cross-validation diagnostics.
    """

    feature_set: str | tuple = "acc-ts"
    interval_hours: int = 24
    models: tuple = (ModelConfig(),)
    repeats: int = 50
    folds: int = 5
    test_fraction: float = 0.2
    seed: int = 0
    smote_m: int = 10
    smote_k: int = 5
    target_ratio: float = 1.0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be positive")
        if self.folds != 0 and self.folds < 2:
            raise ValueError("folds must be 0 (skip) or at least 2")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie strictly between 0 and 1")
        if isinstance(self.feature_set, list):
            self.feature_set = tuple(self.feature_set)
        self.models = tuple(self.models)

    @property
    def sampler_params(self) -> dict:
        return {"m_neighbors": self.smote_m, "k_neighbors": self.smote_k, "target_ratio": self.target_ratio}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_set"] = (
            list(self.feature_set) if isinstance(self.feature_set, tuple) else self.feature_set
        )
        d["models"] = [m.to_dict() for m in self.models]
        return d


@dataclass
class EvaluationReport:
    plan: dict
    model: dict
    per_repeat: list = field(default_factory=list)
    wall_time_s: float | None = None

    @property
    def mean(self) -> dict:
        return {k: float(np.mean([r[k] for r in self.per_repeat])) for k in METRIC_NAMES}

    def to_dict(self, timing=True) -> dict:
        return {
            "plan": self.plan,
            "model": self.model,
            "per_repeat": self.per_repeat,
            "mean": self.mean,
            "wall_time_s": self.wall_time_s if timing else None,
        }

    def write_json(self, path, timing=True):
        Path(path).write_text(json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n")


def _one_repeat(X, y, r, plan: ExperimentPlan, config: ModelConfig, split=None):
    seed = plan.seed + r
    if split is None:
        tr, te = stratified_split(y, plan.test_fraction, seed)
    else:
        tr, te = split(seed)
    rec = {"repeat": r, "seed": seed, "n_train": int(tr.size), "n_test": int(te.size)}
    if plan.folds:
        rec["cv"] = kfold_cv(X[tr], y[tr], plan.folds, config, seed, plan.sampler_params)
    _, pred, n_res = _fit_predict(X[tr], y[tr], X[te], config, seed, plan.sampler_params)
    c = ConfusionCounts.from_predictions(y[te], pred)
    rec["n_train_resampled"] = int(n_res)
    rec["counts"] = c.as_dict()
    rec.update(metrics(c))
    return rec


def evaluate(table: FeatureTable, plan: ExperimentPlan, config: ModelConfig, n_jobs=None, split=None):
    """Run ``plan.repeats`` repeats of one model on one feature table.

    ``split`` optionally replaces the stratified split: a callable taking the
    repeat seed and returning ``(train_idx, test_idx)``.
    """
    t0 = time.perf_counter()
    recs = Parallel(n_jobs=n_jobs)(
        delayed(_one_repeat)(table.X, table.y, r, plan, config, split) for r in range(plan.repeats)
    )
    return EvaluationReport(
        plan.to_dict(), config.to_dict(), sorted(recs, key=lambda d: d["repeat"]), time.perf_counter() - t0
    )


def resolve_features(table: FeatureTable, feature_set) -> FeatureTable:
    """Restrict a table to a named feature set or an explicit list of names."""
    if isinstance(feature_set, str):
        return table.select(FEATURE_SETS[feature_set.lower().replace("_", "-")].names)
    return table.select(feature_set)


# experiment 1 -------------------------------------------------------------

EXP1_SETS = ("acc", "ts", "acc-ts")
EXP1_INTERVALS = (12, 24, 48)


def run_experiment1(
    source,
    plan: ExperimentPlan,
    feature_sets: Sequence[str] = EXP1_SETS,
    intervals: Sequence[int] = EXP1_INTERVALS,
    n_jobs=None,
) -> list[dict]:
    """Every (feature set, interval, model) arm.

    ``source`` is a :class:`~ponzitrace.ingest.Dataset` or a mapping from
    interval hours to an ACC-TS :class:`FeatureTable`. Account features do
    not depend on the interval, so the ACC arm runs once.
    """
    out = []
    for T in intervals:
        table = source[T] if isinstance(source, dict) else build_feature_table(source, "acc-ts", T, n_jobs)
        for fs in feature_sets:
            if fs == "acc" and T != intervals[0]:
                continue
            sub = resolve_features(table, fs)
            for config in plan.models:
                rep = evaluate(sub, plan, config, n_jobs)
                out.append(
                    {
                        "feature_set": fs,
                        "interval_hours": None if fs == "acc" else T,
                        "n_features": sub.n_features,
                        "model": config.label,
                        "report": rep,
                    }
                )
    return out


def write_experiment1_csv(rows: list[dict], path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature_set", "interval_hours", "n_features", "model", *METRIC_NAMES])
        for row in rows:
            m = row["report"].mean
            w.writerow(
                [row["feature_set"], row["interval_hours"] or "", row["n_features"], row["model"]]
                + [repr(m[k]) for k in METRIC_NAMES]
            )


# experiment 2 -------------------------------------------------------------


def rank_features(names: Sequence[str], counts) -> list[str]:
    """Names by split count descending; equal counts keep registry order."""
    counts = np.asarray(counts)
    order = np.argsort(-counts, kind="stable")
    return [names[i] for i in order]


@dataclass
class ImportanceSweep:
    names: tuple
    counts: np.ndarray
    ranking: list
    curve: list  # (k, mean f1, ts share)
    best_k: int
    reports: dict

    @property
    def n_used(self) -> int:
        return int(np.count_nonzero(self.counts))

    def prefix(self, k: int) -> list[str]:
        return self.ranking[:k]

    def composition(self, k: int) -> dict:
        ts = sum(1 for n in self.prefix(k) if n not in ACCOUNT_REGISTRY)
        return {"k": k, "account": k - ts, "timeseries": ts}

    def write_curve_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "f1", "ts_share"])
            for k, f1, share in self.curve:
                w.writerow([k, repr(f1), repr(share)])

    def write_ranking_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "feature", "split_count"])
            idx = {n: i for i, n in enumerate(self.names)}
            for i, n in enumerate(self.ranking, 1):
                w.writerow([i, n, int(self.counts[idx[n]])])


def importance_counts(table: FeatureTable, plan: ExperimentPlan, config: ModelConfig) -> np.ndarray:
    """Split counts of a model fit on the oversampled training split of repeat 0."""
    tr, _ = stratified_split(table.y, plan.test_fraction, plan.seed)
    sampler = BorderlineSMOTE(random_state=plan.seed, **plan.sampler_params)
    Xs, ys = sampler.fit_resample(table.X[tr], table.y[tr])
    return feature_importance(make_model(config.with_seed(plan.seed)).fit(Xs, ys))


def run_experiment2(
    table: FeatureTable,
    plan: ExperimentPlan,
    step: int = 5,
    config: ModelConfig | None = None,
    ks: Sequence[int] | None = None,
    n_jobs=None,
) -> ImportanceSweep:
    """F1 of the top-k features by split count, for k = step, 2 step, ...

    Each prefix is trained with its columns in the table's order, so the
    full-width prefix reproduces the plain ACC-TS run exactly.
    """
    config = config or ModelConfig(kind="gbdt", growth="leaf_wise")
    if config.kind == "knn":
        raise ValueError("importance sweep needs a tree model")
    if step < 1:
        raise ValueError("step must be positive")
    counts = importance_counts(table, plan, config)
    ranking = rank_features(table.names, counts)
    F = table.n_features
    if ks is None:
        ks = list(range(step, F + 1, step))
        if ks[-1] != F:
            ks.append(F)
    curve, reports = [], {}
    for k in ks:
        prefix = ranking[:k]
        rep = evaluate(table.select(prefix), plan, config, n_jobs)
        ts_share = sum(1 for n in prefix if n not in ACCOUNT_REGISTRY) / k
        curve.append((k, rep.mean["f1"], ts_share))
        reports[k] = rep
    best_k = max(curve, key=lambda row: (row[1], -row[0]))[0]
    return ImportanceSweep(tuple(table.names), counts, ranking, curve, best_k, reports)


# experiment 3 -------------------------------------------------------------


def holdout_members(holdout_type: str) -> tuple[str, ...]:
    if holdout_type == "chain":
        raise ValueError(
            "chain-shaped schemes are the bulk of the Ponzi class; holding them out "
            "leaves too few Ponzi rows to train on"
        )
    if holdout_type not in HOLDOUT_TYPES:
        raise ValueError(f"holdout type must be one of {HOLDOUT_TYPES}, got {holdout_type!r}")
    if holdout_type == "all_three":
        return ("tree", "handover", "waterfall")
    return (holdout_type,)


def negatives_for_rate(n_holdout: int, scam_rate: float) -> int:
    """Non-Ponzi rows to add so held-out Ponzi rows make up ``scam_rate``."""
    r = _exact(scam_rate)
    if not 0 < r <= 1:
        raise ValueError("scam_rate must lie in (0, 1]")
    return math.floor(n_holdout * (1 - r) / r)


def run_experiment3(
    table: FeatureTable,
    plan: ExperimentPlan,
    holdout_type: str,
    scam_rate: float,
    config: ModelConfig | None = None,
    n_jobs=None,
) -> EvaluationReport:
    """Train without one Ponzi type, test on it plus sampled non-Ponzi rows."""
    members = holdout_members(holdout_type)
    config = config or (plan.models[0] if plan.models else ModelConfig())
    types = np.array([t if t is not None else "" for t in table.ponzi_types], dtype=object)
    known = set(PONZI_TYPES)
    if not any(t in known for t in types):
        raise ValueError("feature table carries no Ponzi types; supply them from the labels")
    held = np.flatnonzero(np.isin(types, members) & (table.y == 1))
    if held.size == 0:
        raise ValueError(f"no Ponzi rows of type {holdout_type!r} in the data")
    n_neg = negatives_for_rate(held.size, scam_rate)
    negatives = np.flatnonzero(table.y == 0)
    if n_neg > negatives.size:
        raise ValueError(f"need {n_neg} non-Ponzi rows, only {negatives.size} available")
    n = table.y.size

    def split(seed):
        rng = np.random.default_rng(seed)
        neg = np.sort(rng.choice(negatives, size=n_neg, replace=False)) if n_neg else np.empty(0, int)
        test = np.sort(np.concatenate([held, neg]))
        return np.setdiff1d(np.arange(n), test), test

    rep = evaluate(table, plan, config, n_jobs, split=split)
    rep.plan = {**rep.plan, "holdout_type": holdout_type, "scam_rate": scam_rate, "n_holdout": int(held.size), "n_negatives": n_neg}
    return rep


__all__ = [
    "ConfusionCounts",
    "metrics",
    "stratified_split",
    "stratified_folds",
    "kfold_cv",
    "ExperimentPlan",
    "EvaluationReport",
    "evaluate",
    "resolve_features",
    "run_experiment1",
    "run_experiment2",
    "run_experiment3",
    "rank_features",
    "negatives_for_rate",
    "holdout_members",
]
