"""Interval bucketing and the per-interval series of an application."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .ingest import WEI_PER_ETH, ApplicationRecord, IngestError

logger = logging.getLogger(__name__)

INTERVAL_HOURS = (12, 24, 48)

VALUE_SERIES = (
    "balance",
    "profit_and_loss",
    "loss",
    "loss_by_contract",
    "loss_by_person",
    "loss_from_internal_txs",
    "loss_from_normal_txs",
    "profit",
    "profit_by_contract",
    "profit_by_person",
    "profit_from_internal_txs",
    "profit_from_normal_txs",
)
COUNT_SERIES = (
    "total_txs",
    "total_internal_txs",
    "total_in_coming_txs",
    "total_in_coming_internal_txs",
    "total_in_coming_normal_txs",
    "total_normal_txs",
    "total_out_going_txs",
    "total_out_going_internal_txs",
    "total_out_going_normal_txs",
)
ADDRESS_SERIES = (
    "total_unique_addresses",
    "total_unique_in_coming_addresses",
    "total_unique_in_coming_addresses_from_internal",
    "total_unique_in_coming_addresses_from_normal",
    "total_unique_out_going_addresses",
    "total_unique_out_going_addresses_from_internal",
    "total_unique_out_going_addresses_from_normal",
)
FUNCTION_SERIES = (
    "total_unique_calling_function",
    "total_unique_in_coming_calling_function",
    "total_unique_in_coming_calling_function_from_internal",
    "total_unique_in_coming_calling_function_from_normal",
    "total_unique_out_going_calling_function",
    "total_unique_out_going_calling_function_from_internal",
    "total_unique_out_going_calling_function_from_normal",
)
ACCOUNT_TYPE_SERIES = (
    "num_in_coming_txs_from_contract",
    "num_in_coming_txs_from_person",
    "num_out_going_txs_to_contract",
    "num_out_going_txs_to_person",
    "num_unique_in_coming_contract_address",
    "num_unique_in_coming_person_address",
    "num_unique_out_going_contract_address",
    "num_unique_out_going_person_address",
)

SERIES_NAMES = (
    VALUE_SERIES + COUNT_SERIES + ADDRESS_SERIES + FUNCTION_SERIES + ACCOUNT_TYPE_SERIES
)
assert len(SERIES_NAMES) == 43


@dataclass(frozen=True)
class IntervalSpec:
    T_hours: int
    N: int

    @property
    def width_secs(self) -> int:
        return 3600 * self.T_hours

    @classmethod
    def for_lifetime(cls, lifetime_secs: int, T_hours: int) -> "IntervalSpec":
        if T_hours <= 0:
            raise ValueError("interval length must be positive")
        n = math.ceil(lifetime_secs / (3600 * T_hours))
        return cls(T_hours, max(1, n))


@dataclass(frozen=True)
class TimeSeriesPanel:
    address: str
    spec: IntervalSpec
    values: np.ndarray  # (N, 43), columns in SERIES_NAMES order

    @property
    def N(self) -> int:
        return self.spec.N

    def series(self, name: str) -> np.ndarray:
        return self.values[:, SERIES_NAMES.index(name)]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: self.values[:, j] for j, name in enumerate(SERIES_NAMES)}


def assign_intervals(app: ApplicationRecord, T_hours: int):
    """Pair each transaction with its interval index in ``[0, N)``.

    Intervals are left-closed and anchored at ``created_at``; the final
    timestamp is folded into the last interval when the lifetime is an exact
    multiple of the width.
    """
    spec = IntervalSpec.for_lifetime(app.lifetime_secs, T_hours)
    width = spec.width_secs
    out = []
    for tx in app.txs:
        offset = tx.timestamp - app.created_at
        if offset < 0:
            raise IngestError(f"{tx.tx_hash} predates creation of {app.address}")
        out.append((tx, min(offset // width, spec.N - 1)))
    return out


def build_panel(app: ApplicationRecord, T_hours: int) -> TimeSeriesPanel:
    addr = app.address
    spec = IntervalSpec.for_lifetime(app.lifetime_secs, T_hours)
    n = spec.N
    # wei sums stay as python ints until emission
    wei = {name: [0] * n for name in VALUE_SERIES if name not in ("balance", "profit_and_loss")}
    counts = {name: np.zeros(n) for name in COUNT_SERIES + ACCOUNT_TYPE_SERIES[:4]}
    uniq = {
        name: [set() for _ in range(n)]
        for name in ADDRESS_SERIES + FUNCTION_SERIES + ACCOUNT_TYPE_SERIES[4:]
    }

    for tx, i in assign_intervals(app, T_hours):
        incoming = tx.to_addr == addr
        internal = tx.kind == "internal"
        kind = "internal" if internal else "normal"
        other = tx.from_addr if incoming else tx.to_addr
        is_contract = tx.counterpart_is_contract
        sel = tx.input_selector

        counts["total_txs"][i] += 1
        counts[f"total_{kind}_txs"][i] += 1
        uniq["total_unique_addresses"][i].add(other)
        if sel is not None:
            uniq["total_unique_calling_function"][i].add(sel)
        if incoming:
            direction, flow = "in_coming", "profit"
            party = "contract" if is_contract else "person"
            counts[f"num_in_coming_txs_from_{party}"][i] += 1
            uniq[f"num_unique_in_coming_{party}_address"][i].add(other)
        else:
            direction, flow = "out_going", "loss"
            party = "contract" if is_contract else "person"
            counts[f"num_out_going_txs_to_{party}"][i] += 1
            uniq[f"num_unique_out_going_{party}_address"][i].add(other)
        counts[f"total_{direction}_txs"][i] += 1
        counts[f"total_{direction}_{kind}_txs"][i] += 1
        uniq[f"total_unique_{direction}_addresses"][i].add(other)
        uniq[f"total_unique_{direction}_addresses_from_{kind}"][i].add(other)
        if sel is not None:
            uniq[f"total_unique_{direction}_calling_function"][i].add(sel)
            uniq[f"total_unique_{direction}_calling_function_from_{kind}"][i].add(sel)
        v = tx.value_wei
        wei[flow][i] += v
        wei[f"{flow}_by_{party}"][i] += v
        wei[f"{flow}_from_{kind}_txs"][i] += v

    pnl = [p - q for p, q in zip(wei["profit"], wei["loss"])]
    balance, running = [], 0
    for delta in pnl:
        running += delta
        balance.append(running)
    if any(b < 0 for b in balance):
        logger.warning("negative balance in %s; input may be incomplete", addr)

    columns = {}
    columns["balance"] = np.array(balance, dtype=float) / WEI_PER_ETH
    columns["profit_and_loss"] = np.array(pnl, dtype=float) / WEI_PER_ETH
    for name, col in wei.items():
        columns[name] = np.array(col, dtype=float) / WEI_PER_ETH
    columns.update(counts)
    for name, sets in uniq.items():
        columns[name] = np.array([len(s) for s in sets], dtype=float)
    values = np.column_stack([columns[name] for name in SERIES_NAMES])
    return TimeSeriesPanel(addr, spec, values)


def write_panel_csv(path, panel: TimeSeriesPanel):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["interval_index", *SERIES_NAMES])
        for i, row in enumerate(panel.values):
            writer.writerow([i, *(repr(float(v)) for v in row)])
