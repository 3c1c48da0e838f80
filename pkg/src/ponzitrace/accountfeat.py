"""Whole-lifetime account features of an application."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import WEI_PER_ETH, ApplicationRecord


@dataclass(frozen=True)
class FeatureRegistry:
    """Ordered feature names; the order is the column order everywhere."""

    name: str
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate names in registry {self.name}")

    @property
    def arity(self) -> int:
        return len(self.names)

    def index(self, feature: str) -> int:
        return self.names.index(feature)

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, feature) -> bool:
        return feature in self.names


ACCOUNT_REGISTRY = FeatureRegistry(
    "account",
    (
        # Chen et al.
        "know_rate",
        "balance",
        "num_in_txs",
        "num_out_txs",
        "difference_idx",
        "paid_rate",
        "max_pay",
        # Jung et al., without size_info
        "total_inv_amt",
        "total_pay_amt",
        "avg_inv_amt",
        "avg_pay_amt",
        "dev_inv_amt",
        "dev_pay_amt",
        "avg_time_btw_txs",
        "life_time",
        "gini_amt_in",
        "gini_amt_out",
        "overlap_addr",
        "gini_time_in",
        "gini_time_out",
        "num_inv_acc",
        "num_pay_acc",
        # other
        "balance_rate",
        "payment_time",
        "num_all_txs",
        "pay_skewness",
        "num_in_internal_txs",
        "num_out_internal_txs",
        "nbr_tx_in",
    ),
)


def _ratio(num, den) -> float:
    return float(num) / float(den) if den else 0.0


def gini(values: Sequence[float]) -> float:
    """Gini coefficient as mean absolute pairwise difference over ``2 n^2 mean``.

    Returns 0 for an all-zero input.
    """
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("gini of an empty sequence")
    if np.any(x < 0):
        raise ValueError("gini needs non-negative values")
    total = x.sum()
    if total == 0:
        return 0.0
    # sum_{i,j} |x_i - x_j| = 2 * sum_i (2i - n - 1) x_(i) with 1-based ranks
    ranks = np.arange(1, n + 1)
    g = np.dot(2 * ranks - n - 1, x) / (n * total)
    return float(min(max(g, 0.0), 1.0))


def skewness(values: Sequence[float]) -> float:
    """Moment skewness m3 / m2**1.5; 0 for fewer than 3 values or zero spread."""
    x = np.asarray(values, dtype=float)
    if x.size < 3:
        return 0.0
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 <= 0:
        return 0.0
    return float(np.mean(d**3) / m2**1.5)


def _std(values) -> float:
    return float(np.std(values)) if len(values) else 0.0


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else 0.0


def account_feature_dict(app: ApplicationRecord) -> dict[str, float]:
    addr = app.address
    in_txs = [tx for tx in app.txs if tx.to_addr == addr]
    out_txs = [tx for tx in app.txs if tx.from_addr == addr]

    total_in = sum(tx.value_wei for tx in in_txs)
    total_out = sum(tx.value_wei for tx in out_txs)
    in_eth = [tx.value_wei / WEI_PER_ETH for tx in in_txs]
    out_eth = [tx.value_wei / WEI_PER_ETH for tx in out_txs]

    inv_amt: dict[str, int] = defaultdict(int)
    inv_cnt: Counter = Counter()
    first_inv: dict[str, int] = {}
    for pos, tx in enumerate(app.txs):
        if tx.to_addr == addr:
            inv_amt[tx.from_addr] += tx.value_wei
            inv_cnt[tx.from_addr] += 1
            first_inv.setdefault(tx.from_addr, pos)
    pay_amt: dict[str, int] = defaultdict(int)
    pay_cnt: Counter = Counter()
    first_pay: dict[str, int] = {}
    for pos, tx in enumerate(app.txs):
        if tx.from_addr == addr:
            pay_amt[tx.to_addr] += tx.value_wei
            pay_cnt[tx.to_addr] += 1
            first_pay.setdefault(tx.to_addr, pos)

    investors, payees = set(inv_cnt), set(pay_cnt)
    participants = investors | payees
    overlap = investors & payees
    knowing = sum(1 for a in overlap if first_inv[a] < first_pay[a])

    lifetime = app.lifetime_secs
    stamps = np.array([tx.timestamp for tx in app.txs], dtype=float)
    gaps = np.diff(stamps)
    payment_time = 0.0
    if out_txs and lifetime > 0:
        payment_time = (out_txs[-1].timestamp - app.created_at) / lifetime

    n_in, n_out = len(in_txs), len(out_txs)
    balance_wei = total_in - total_out
    return {
        "know_rate": _ratio(knowing, len(participants)),
        "balance": balance_wei / WEI_PER_ETH,
        "num_in_txs": float(n_in),
        "num_out_txs": float(n_out),
        "difference_idx": (n_in - n_out) / max(1, n_in + n_out),
        "paid_rate": _ratio(len(overlap), len(investors)),
        "max_pay": float(max(pay_cnt.values(), default=0)),
        "total_inv_amt": total_in / WEI_PER_ETH,
        "total_pay_amt": total_out / WEI_PER_ETH,
        "avg_inv_amt": _ratio(total_in, n_in) / WEI_PER_ETH,
        "avg_pay_amt": _ratio(total_out, n_out) / WEI_PER_ETH,
        "dev_inv_amt": _std(in_eth),
        "dev_pay_amt": _std(out_eth),
        "avg_time_btw_txs": _mean(gaps),
        "life_time": float(lifetime),
        "gini_amt_in": gini(list(inv_amt.values())) if inv_amt else 0.0,
        "gini_amt_out": gini(list(pay_amt.values())) if pay_amt else 0.0,
        "overlap_addr": float(len(overlap)),
        "gini_time_in": gini(list(inv_cnt.values())) if inv_cnt else 0.0,
        "gini_time_out": gini(list(pay_cnt.values())) if pay_cnt else 0.0,
        "num_inv_acc": float(len(investors)),
        "num_pay_acc": float(len(payees)),
        "balance_rate": _ratio(balance_wei, total_in),
        "payment_time": payment_time,
        "num_all_txs": float(n_in + n_out),
        "pay_skewness": skewness(out_eth),
        "num_in_internal_txs": float(sum(tx.kind == "internal" for tx in in_txs)),
        "num_out_internal_txs": float(sum(tx.kind == "internal" for tx in out_txs)),
        "nbr_tx_in": float(sum(tx.value_wei > 0 for tx in in_txs)),
    }


def compute_account_features(app: ApplicationRecord) -> np.ndarray:
    """Account feature vector aligned to :data:`ACCOUNT_REGISTRY`."""
    feats = account_feature_dict(app)
    return np.array([feats[name] for name in ACCOUNT_REGISTRY.names], dtype=float)
