"""Transaction file parsing, refinement and labeled application assembly."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

WEI_PER_ETH = 10**18
ONE_DAY_SECS = 86_400

KINDS = ("normal", "internal")
STATUSES = ("success", "failed")
LABELS = ("ponzi", "non_ponzi")
PONZI_TYPES = ("chain", "tree", "handover", "waterfall", "other")

TX_FIELDS = (
    "tx_hash",
    "timestamp",
    "from",
    "to",
    "value_wei",
    "kind",
    "status",
    "input",
    "counterpart_is_contract",
)

_HEX = frozenset("0123456789abcdef")


class IngestError(ValueError):
    """Raised for malformed input files or inconsistent corpora."""


@dataclass(frozen=True, slots=True)
class Transaction:
    tx_hash: str
    timestamp: int
    from_addr: str
    to_addr: str
    value_wei: int
    kind: str = "normal"
    status: str = "success"
    input_selector: str | None = None
    counterpart_is_contract: bool = False

    def __post_init__(self):
        if self.value_wei < 0:
            raise IngestError(f"negative value in {self.tx_hash}")
        if self.kind not in KINDS:
            raise IngestError(f"unknown kind {self.kind!r}")
        if self.status not in STATUSES:
            raise IngestError(f"unknown status {self.status!r}")
        sel = self.input_selector
        if sel is not None and (len(sel) != 8 or not set(sel) <= _HEX):
            raise IngestError(f"bad selector {sel!r}")

    def is_incoming(self, address: str) -> bool:
        return self.to_addr == address

    def counterpart(self, address: str) -> str:
        return self.from_addr if self.to_addr == address else self.to_addr

    def to_row(self) -> dict:
        return {
            "tx_hash": self.tx_hash,
            "timestamp": self.timestamp,
            "from": self.from_addr,
            "to": self.to_addr,
            "value_wei": str(self.value_wei),
            "kind": self.kind,
            "status": self.status,
            "input": "0x" + self.input_selector if self.input_selector else "",
            "counterpart_is_contract": self.counterpart_is_contract,
        }


def _sort_key(tx: Transaction):
    return (tx.timestamp, tx.tx_hash)


@dataclass(frozen=True)
class ApplicationRecord:
    """One contract address with its label and ordered transaction history.

    ``created_at`` is the timestamp of the earliest transaction, and
    ``lifetime_secs`` spans from there to the last one.
    """

    address: str
    label: str
    ponzi_type: str | None = None
    txs: tuple[Transaction, ...] = ()
    created_at: int | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise IngestError(f"unknown label {self.label!r} for {self.address}")
        if self.ponzi_type is not None and self.ponzi_type not in PONZI_TYPES:
            raise IngestError(f"unknown ponzi_type {self.ponzi_type!r}")
        txs = tuple(sorted(self.txs, key=_sort_key))
        object.__setattr__(self, "txs", txs)
        if self.created_at is None and txs:
            object.__setattr__(self, "created_at", txs[0].timestamp)

    @property
    def lifetime_secs(self) -> int:
        if not self.txs:
            return 0
        return self.txs[-1].timestamp - self.created_at

    @property
    def is_ponzi(self) -> bool:
        return self.label == "ponzi"


@dataclass(frozen=True)
class Dataset:
    apps: tuple[ApplicationRecord, ...]
    report: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        dupes = [a for a, n in Counter(app.address for app in self.apps).items() if n > 1]
        if dupes:
            raise IngestError(f"duplicate addresses: {sorted(dupes)}")

    @property
    def M(self) -> int:
        return len(self.apps)

    def __len__(self):
        return len(self.apps)

    def __iter__(self):
        return iter(self.apps)

    def label_counts(self) -> dict[str, int]:
        counts = Counter(app.label for app in self.apps)
        return {lab: counts.get(lab, 0) for lab in LABELS}


# --- parsing -----------------------------------------------------------------


def _parse_bool(raw, lineno):
    if isinstance(raw, bool):
        return raw
    token = str(raw).strip().lower()
    if token in ("1", "true"):
        return True
    if token in ("0", "false", ""):
        return False
    raise IngestError(f"line {lineno}: bad boolean {raw!r}")


def _parse_selector(raw: str, lineno: int) -> str | None:
    raw = (raw or "").strip().lower()
    if not raw:
        return None
    if not raw.startswith("0x"):
        raise IngestError(f"line {lineno}: input must be 0x-prefixed hex")
    body = raw[2:]
    if not set(body) <= _HEX:
        raise IngestError(f"line {lineno}: input is not hex")
    return body[:8] if len(body) >= 8 else None


def _row_to_tx(row: Mapping, lineno: int) -> Transaction:
    missing = [k for k in TX_FIELDS if k not in row]
    if missing:
        raise IngestError(f"line {lineno}: missing keys {missing}")
    kind = str(row["kind"]).strip()
    status = str(row["status"]).strip()
    if kind not in KINDS:
        raise IngestError(f"line {lineno}: unknown kind {kind!r}")
    if status not in STATUSES:
        raise IngestError(f"line {lineno}: unknown status {status!r}")
    try:
        value = int(str(row["value_wei"]).strip())
        timestamp = int(str(row["timestamp"]).strip())
    except ValueError as exc:
        raise IngestError(f"line {lineno}: {exc}") from None
    try:
        return Transaction(
            tx_hash=str(row["tx_hash"]),
            timestamp=timestamp,
            from_addr=str(row["from"]).strip().lower(),
            to_addr=str(row["to"]).strip().lower(),
            value_wei=value,
            kind=kind,
            status=status,
            input_selector=_parse_selector(row["input"], lineno),
            counterpart_is_contract=_parse_bool(row["counterpart_is_contract"], lineno),
        )
    except IngestError as exc:
        raise IngestError(f"line {lineno}: {exc}") from None


def parse_transactions(path, schema: str | None = None) -> list[Transaction]:
    """Read every row of a transactions file, in file order.

    Failed transactions are kept; use :func:`filter_failed` to drop them.
    ``schema`` is ``"jsonl"`` or ``"csv"``; when omitted it is taken from the
    file suffix.
    """
    path = Path(path)
    if schema is None:
        schema = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    txs = []
    if schema == "jsonl":
        with path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IngestError(f"line {lineno}: {exc.msg}") from None
                if not isinstance(row, dict):
                    raise IngestError(f"line {lineno}: expected an object")
                txs.append(_row_to_tx(row, lineno))
    elif schema == "csv":
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            for lineno, row in enumerate(reader, start=2):
                if None in row or any(v is None for v in row.values()):
                    raise IngestError(f"line {lineno}: wrong number of columns")
                txs.append(_row_to_tx(row, lineno))
    else:
        raise IngestError(f"unknown schema {schema!r}")
    return txs


def write_transactions(path, txs: Iterable[Transaction], schema: str | None = None):
    path = Path(path)
    if schema is None:
        schema = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if schema == "jsonl":
        with path.open("w") as fh:
            for tx in txs:
                fh.write(json.dumps(tx.to_row()) + "\n")
    elif schema == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=TX_FIELDS)
            writer.writeheader()
            for tx in txs:
                row = tx.to_row()
                row["counterpart_is_contract"] = int(row["counterpart_is_contract"])
                writer.writerow(row)
    else:
        raise IngestError(f"unknown schema {schema!r}")


def filter_failed(txs: Iterable[Transaction]) -> list[Transaction]:
    return [tx for tx in txs if tx.status == "success"]


# --- labels and address types -----------------------------------------------


@dataclass(frozen=True)
class Label:
    address: str
    label: str
    ponzi_type: str | None


def read_labels(path) -> list[Label]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"address", "label"} <= set(reader.fieldnames):
            raise IngestError("labels file needs a header with address,label,ponzi_type")
        for lineno, row in enumerate(reader, start=2):
            label = (row.get("label") or "").strip()
            if label not in LABELS:
                raise IngestError(f"line {lineno}: unknown label {label!r}")
            ptype = (row.get("ponzi_type") or "").strip() or None
            if ptype is not None and ptype not in PONZI_TYPES:
                raise IngestError(f"line {lineno}: unknown ponzi_type {ptype!r}")
            if label == "non_ponzi" and ptype is not None:
                raise IngestError(f"line {lineno}: non_ponzi rows take no ponzi_type")
            out.append(Label(row["address"].strip().lower(), label, ptype))
    return out


def write_labels(path, apps: Iterable[ApplicationRecord]):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["address", "label", "ponzi_type"])
        for app in apps:
            writer.writerow([app.address, app.label, app.ponzi_type or ""])


def read_address_types(path) -> dict[str, bool]:
    types = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            flag = (row.get("is_contract") or "").strip()
            if flag not in ("0", "1"):
                raise IngestError(f"line {lineno}: is_contract must be 0 or 1")
            types[row["address"].strip().lower()] = flag == "1"
    return types


def group_by_address(
    txs: Iterable[Transaction], addresses: Iterable[str]
) -> dict[str, list[Transaction]]:
    """Collect, for each address, the transactions it sends or receives.

    Self-transfers (sender and receiver both the address) are skipped since
    they carry no direction.
    """
    wanted = {a.lower() for a in addresses}
    groups: dict[str, list[Transaction]] = {a: [] for a in wanted}
    skipped = 0
    for tx in txs:
        if tx.from_addr == tx.to_addr:
            skipped += tx.from_addr in wanted
            continue
        if tx.from_addr in wanted:
            groups[tx.from_addr].append(tx)
        if tx.to_addr in wanted:
            groups[tx.to_addr].append(tx)
    if skipped:
        logger.warning("skipped %d self-transfers", skipped)
    return groups


def apply_address_types(
    address: str, txs: Iterable[Transaction], types: Mapping[str, bool]
) -> list[Transaction]:
    out = []
    for tx in txs:
        flag = types.get(tx.counterpart(address))
        if flag is not None and flag != tx.counterpart_is_contract:
            tx = replace(tx, counterpart_is_contract=flag)
        out.append(tx)
    return out


def join_labels(
    txs_by_address: Mapping[str, Sequence[Transaction]],
    labels,
    strict: bool = True,
) -> list[ApplicationRecord]:
    """Build one record per labeled address.

    ``labels`` is a labels-file path or a sequence of :class:`Label`.
    Addresses without a label are ignored. A labeled address absent from
    ``txs_by_address`` raises when ``strict``; otherwise it is skipped with a
    warning per address.
    """
    if not isinstance(labels, (list, tuple)):
        labels = read_labels(labels)
    missing = [lab.address for lab in labels if lab.address not in txs_by_address]
    if missing and strict:
        raise IngestError(f"labeled addresses without transactions: {missing}")
    for addr in missing:
        warnings.warn(f"no transactions for labeled address {addr}", stacklevel=2)
    return [
        ApplicationRecord(
            address=lab.address,
            label=lab.label,
            ponzi_type=lab.ponzi_type,
            txs=tuple(txs_by_address[lab.address]),
        )
        for lab in labels
        if lab.address in txs_by_address
    ]


def refine_dataset(apps: Iterable[ApplicationRecord]) -> Dataset:
    """Drop applications with no transactions or a lifetime under one day."""
    apps = list(apps)
    dupes = [a for a, n in Counter(app.address for app in apps).items() if n > 1]
    if dupes:
        raise IngestError(f"duplicate addresses: {sorted(dupes)}")
    kept, dropped = [], Counter()
    for app in apps:
        if not app.txs or app.lifetime_secs < ONE_DAY_SECS:
            dropped[app.label] += 1
        else:
            kept.append(app)
    kept.sort(key=lambda a: a.address)
    retained = Counter(app.label for app in kept)
    report = {
        "retained": {lab: retained.get(lab, 0) for lab in LABELS},
        "dropped": {lab: dropped.get(lab, 0) for lab in LABELS},
    }
    return Dataset(tuple(kept), report)


def assemble(
    txs: Iterable[Transaction],
    labels,
    address_types: Mapping[str, bool] | None = None,
    strict: bool = False,
) -> Dataset:
    """Full ingest path: group, drop failed, apply address types, label, refine."""
    if not isinstance(labels, (list, tuple)):
        labels = read_labels(labels)
    groups = group_by_address(txs, [lab.address for lab in labels])
    cleaned = {}
    for addr, group in groups.items():
        group = filter_failed(group)
        if address_types:
            group = apply_address_types(addr, group, address_types)
        cleaned[addr] = group
    return refine_dataset(join_labels(cleaned, labels, strict=strict))


# --- dataset file --------------------------------------------------------------


def save_dataset(path, dataset: Dataset):
    """Write one JSON object per application (transactions inlined)."""
    with Path(path).open("w") as fh:
        for app in dataset.apps:
            obj = {
                "address": app.address,
                "label": app.label,
                "ponzi_type": app.ponzi_type,
                "created_at": app.created_at,
                "txs": [tx.to_row() for tx in app.txs],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_dataset(path) -> Dataset:
    apps = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            txs = tuple(_row_to_tx(row, lineno) for row in obj["txs"])
            apps.append(
                ApplicationRecord(
                    address=obj["address"],
                    label=obj["label"],
                    ponzi_type=obj.get("ponzi_type"),
                    txs=txs,
                    created_at=obj.get("created_at"),
                )
            )
    return Dataset(tuple(apps), {"retained": dict(Counter(a.label for a in apps))})
