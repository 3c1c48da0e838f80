"""Feature extraction transformers and the labeled feature table."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin

from .accountfeat import ACCOUNT_REGISTRY, FeatureRegistry, compute_account_features
from .ingest import ApplicationRecord, Dataset
from .tsbuild import INTERVAL_HOURS, build_panel
from .tsmeasure import TS_FEATURE_NAMES, compress_panel, seasonal_period

TS_REGISTRY = FeatureRegistry("timeseries", TS_FEATURE_NAMES)
ACC_TS_REGISTRY = FeatureRegistry("account+timeseries", ACCOUNT_REGISTRY.names + TS_FEATURE_NAMES)

FEATURE_SETS = {"acc": ACCOUNT_REGISTRY, "ts": TS_REGISTRY, "acc-ts": ACC_TS_REGISTRY}


def normalize_feature_set(name: str) -> str:
    key = name.lower().replace("_", "-")
    if key not in FEATURE_SETS:
        raise ValueError(f"unknown feature set {name!r}; expected one of {sorted(FEATURE_SETS)}")
    return key


class AccountFeatureExtractor(TransformerMixin, BaseEstimator):
    """Map application records to the 29 account features.

    Stateless; ``fit`` only records the output width.
    """

    def __init__(self, n_jobs=None):
        self.n_jobs = n_jobs

    def fit(self, records, y=None):
        self.n_features_out_ = ACCOUNT_REGISTRY.arity
        return self

    def transform(self, records: Sequence[ApplicationRecord]) -> np.ndarray:
        rows = Parallel(n_jobs=self.n_jobs)(
            delayed(compute_account_features)(app) for app in records
        )
        return np.vstack(rows) if rows else np.empty((0, ACCOUNT_REGISTRY.arity))

    def get_feature_names_out(self, input_features=None):
        return np.array(ACCOUNT_REGISTRY.names, dtype=object)


def _ts_block(app, interval_hours, period, lump_width):
    panel = build_panel(app, interval_hours)
    return compress_panel(panel, period, lump_width)


class TimeSeriesFeatureExtractor(TransformerMixin, BaseEstimator):
    """Bucket each application into intervals and compress its 43 series.

    Parameters
    ----------
    interval_hours : int
        Interval length, one of 12, 24 or 48.
    period : int or None
        Seasonal period in intervals; defaults to intervals per week.
    """

    def __init__(self, interval_hours=24, period=None, lump_width=10, n_jobs=None):
        self.interval_hours = interval_hours
        self.period = period
        self.lump_width = lump_width
        self.n_jobs = n_jobs

    def fit(self, records, y=None):
        if self.interval_hours not in INTERVAL_HOURS:
            raise ValueError(f"interval_hours must be one of {INTERVAL_HOURS}")
        self.period_ = self.period or seasonal_period(self.interval_hours)
        self.n_features_out_ = TS_REGISTRY.arity
        return self

    def transform(self, records):
        if not hasattr(self, "period_"):
            self.fit(records)
        rows = Parallel(n_jobs=self.n_jobs)(
            delayed(_ts_block)(app, self.interval_hours, self.period_, self.lump_width)
            for app in records
        )
        return np.vstack(rows) if rows else np.empty((0, TS_REGISTRY.arity))

    def get_feature_names_out(self, input_features=None):
        return np.array(TS_REGISTRY.names, dtype=object)


@dataclass
class FeatureTable:
    """Feature matrix with row metadata; ``y`` is 1 for Ponzi rows."""

    names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    addresses: tuple[str, ...]
    ponzi_types: tuple[str | None, ...] = ()

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.shape != (len(self.addresses), len(self.names)):
            raise ValueError("feature table shape does not match names/addresses")
        if not self.ponzi_types:
            self.ponzi_types = (None,) * len(self.addresses)

    @property
    def n_features(self) -> int:
        return len(self.names)

    def select(self, names: Sequence[str]) -> "FeatureTable":
        """Columns ``names``, kept in this table's column order."""
        wanted = set(names)
        missing = wanted - set(self.names)
        if missing:
            raise KeyError(f"unknown features: {sorted(missing)[:5]}")
        cols = [j for j, n in enumerate(self.names) if n in wanted]
        return FeatureTable(
            tuple(self.names[j] for j in cols),
            self.X[:, cols],
            self.y,
            self.addresses,
            self.ponzi_types,
        )

    def rows(self, idx) -> "FeatureTable":
        idx = np.asarray(idx)
        return FeatureTable(
            self.names,
            self.X[idx],
            self.y[idx],
            tuple(self.addresses[i] for i in idx),
            tuple(self.ponzi_types[i] for i in idx),
        )

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["address", *self.names, "label"])
            for addr, row, lab in zip(self.addresses, self.X, self.y):
                writer.writerow(
                    [addr, *(repr(float(v)) for v in row), "ponzi" if lab else "non_ponzi"]
                )

    @classmethod
    def from_csv(cls, path, ponzi_types=None) -> "FeatureTable":
        """Read a feature CSV; ``ponzi_types`` optionally maps address to type."""
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "address" or header[-1] != "label":
                raise ValueError("feature CSV must start with address and end with label")
            addrs, rows, labels = [], [], []
            for row in reader:
                addrs.append(row[0])
                rows.append([float(v) for v in row[1:-1]])
                if row[-1] not in ("ponzi", "non_ponzi"):
                    raise ValueError(f"bad label {row[-1]!r}")
                labels.append(int(row[-1] == "ponzi"))
        names = tuple(header[1:-1])
        X = np.array(rows, dtype=float).reshape(len(addrs), len(names))
        types = tuple((ponzi_types or {}).get(a) for a in addrs)
        return cls(names, X, np.array(labels, dtype=int), tuple(addrs), types)


def build_feature_table(
    dataset: Dataset | Sequence[ApplicationRecord],
    feature_set: str = "acc-ts",
    interval_hours: int = 24,
    n_jobs=None,
) -> FeatureTable:
    key = normalize_feature_set(feature_set)
    apps = list(dataset.apps if isinstance(dataset, Dataset) else dataset)
    parts = []
    if key in ("acc", "acc-ts"):
        parts.append(AccountFeatureExtractor(n_jobs=n_jobs).fit_transform(apps))
    if key in ("ts", "acc-ts"):
        ts = TimeSeriesFeatureExtractor(interval_hours=interval_hours, n_jobs=n_jobs)
        parts.append(ts.fit_transform(apps))
    X = np.hstack(parts) if apps else np.empty((0, FEATURE_SETS[key].arity))
    return FeatureTable(
        FEATURE_SETS[key].names,
        X,
        np.array([int(a.is_ponzi) for a in apps], dtype=int),
        tuple(a.address for a in apps),
        tuple(a.ponzi_type for a in apps),
    )
