"""Synthetic transaction traces for Ponzi mechanisms and benign contracts.

All money moves in integer wei. Every outflow is funded by the inflows
before it, so the contract balance is never negative at any prefix of the
sorted trace. Payments triggered by an investment share its timestamp and
take the investment's hash plus a numeric suffix, which sorts them after
the investment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import (
    ONE_DAY_SECS,
    WEI_PER_ETH,
    ApplicationRecord,
    Transaction,
    write_labels,
    write_transactions,
)

SCHEMES = ("chain", "tree", "handover", "waterfall", "benign")
BENIGN_STYLES = ("wallet", "token", "game")

# 4-byte selectors used in generated call data
_INVEST = "d0e30db0"
_WITHDRAW = "3ccfd60b"
_TRANSFER = "a9059cbb"

_START = 1_500_000_000


@dataclass(frozen=True)
class SchemeParams:
    """Generator knobs; every field has a default.

    ``interest_fade`` is the ratio of the last to the first mean
    inter-arrival time; gaps grow geometrically in between, so activity
    fades as a scheme ages. ``investments_eth``
    pins the investment amounts (and the investor count) when given.
    """

    scheme: str = "chain"
    n_investors: int = 50
    multiplier: float = 2.0
    fee_rate: float = 0.05
    toll_growth: float = 0.05
    toll_0_eth: float = 0.1
    owed_fraction: float = 0.1
    tree_decay: float = 0.5
    mean_interarrival_secs: float = 4 * 3600.0
    interest_fade: float = 10.0
    investment_mu: float = -1.0
    investment_sigma: float = 0.8
    duration_days: int = 90
    benign_rate_per_day: float = 6.0
    benign_style: str | None = None
    contract_share: float = 0.05
    investments_eth: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.fee_rate < 1:
            raise ValueError("fee_rate must lie in [0, 1)")
        if self.scheme == "chain" and self.multiplier <= 1:
            raise ValueError("chain schemes need multiplier > 1")
        if self.scheme == "handover" and self.toll_growth <= 0:
            raise ValueError("toll_growth must be positive")
        if self.n_investors < 1 or self.mean_interarrival_secs <= 0:
            raise ValueError("n_investors and mean_interarrival_secs must be positive")
        if self.interest_fade < 1:
            raise ValueError("interest_fade must be at least 1")


def _eth(x: float) -> int:
    return int(round(x * WEI_PER_ETH))


class _Trace:
    def __init__(self, params: SchemeParams, rng: np.random.Generator):
        self.rng = rng
        self.params = params
        self.address = self.new_address()
        self.txs: list[Transaction] = []
        self.is_contract: dict[str, bool] = {}
        self.balance = 0

    def new_address(self) -> str:
        return "0x" + self.rng.bytes(20).hex()

    def new_party(self) -> str:
        addr = self.new_address()
        self.is_contract[addr] = bool(self.rng.random() < self.params.contract_share)
        return addr

    def receive(self, ts: int, sender: str, value: int, selector=_INVEST) -> str:
        tx_hash = "0x" + self.rng.bytes(32).hex()
        self.txs.append(
            Transaction(
                tx_hash, int(ts), sender, self.address, int(value), "normal", "success",
                selector, self.is_contract.get(sender, False),
            )
        )
        self.balance += value
        self._n_paid = 0
        self._parent = tx_hash
        return tx_hash

    def pay(self, ts: int, payee: str, value: int):
        if value <= 0:
            return
        if value > self.balance:
            raise AssertionError("generator tried to overdraw the contract")
        self._n_paid += 1
        self.txs.append(
            Transaction(
                f"{self._parent}-{self._n_paid:06d}", int(ts), self.address, payee,
                int(value), "internal", "success", None, self.is_contract.get(payee, False),
            )
        )
        self.balance -= value

    def record(self, label: str, ponzi_type: str | None) -> ApplicationRecord:
        return ApplicationRecord(self.address, label, ponzi_type, tuple(self.txs))


def _arrival_times(p: SchemeParams, n: int, rng) -> np.ndarray:
    growth = np.log(p.interest_fade) / max(n - 2, 1)
    means = p.mean_interarrival_secs * np.exp(growth * np.arange(n - 1))
    gaps = np.maximum(2, np.ceil(rng.exponential(means))).astype(np.int64)
    span = int(gaps.sum())
    if span < 2 * ONE_DAY_SECS:
        # stretch short traces so they survive the one-day lifetime rule
        gaps = np.maximum(2, np.ceil(gaps * (2 * ONE_DAY_SECS / max(span, 1)))).astype(np.int64)
    return _START + np.concatenate(([0], np.cumsum(gaps)))


def _investments(p: SchemeParams, rng) -> list[int]:
    if p.investments_eth is not None:
        return [_eth(v) for v in p.investments_eth]
    draws = rng.lognormal(p.investment_mu, p.investment_sigma, size=p.n_investors)
    return [_eth(round(v, 4)) for v in np.maximum(draws, 1e-3)]


def _setup(p: SchemeParams):
    rng = np.random.default_rng(p.seed)
    trace = _Trace(p, rng)
    amounts = _investments(p, rng)
    times = _arrival_times(p, len(amounts), rng)
    investors = [trace.new_party() for _ in amounts]
    return trace, amounts, times, investors


def _fee(value: int, rate: float) -> int:
    return int(value * rate)


def gen_chain(params: SchemeParams) -> ApplicationRecord:
    """Investors are owed ``multiplier`` times their stake and paid strictly FIFO."""
    trace, amounts, times, investors = _setup(params)
    owed = [int(v * params.multiplier) for v in amounts]
    fund, head = 0, 0
    for i, (ts, who, v) in enumerate(zip(times, investors, amounts)):
        trace.receive(ts, who, v)
        fund += v - _fee(v, params.fee_rate)
        while head <= i and fund >= owed[head]:
            trace.pay(ts, investors[head], owed[head])
            fund -= owed[head]
            head += 1
    return trace.record("ponzi", "chain")


def gen_tree(params: SchemeParams) -> ApplicationRecord:
    """Each newcomer's stake flows up its ancestor path with shares halving.

    The nearest ancestor gets ``tree_decay`` of the distributable amount, the
    next ``tree_decay**2`` and so on; the root takes whatever is left.
    """
    if len(params.investments_eth or ()) == 1 or params.n_investors < 2:
        raise ValueError("tree schemes need at least two investors")
    trace, amounts, times, investors = _setup(params)
    parent = [-1]
    for i, (ts, who, v) in enumerate(zip(times, investors, amounts)):
        trace.receive(ts, who, v)
        if i == 0:
            continue
        parent.append(int(trace.rng.integers(0, i)))
        dist = v - _fee(v, params.fee_rate)
        chain, node = [], parent[i]
        while node != -1:
            chain.append(node)
            node = parent[node]
        left = dist
        for k, anc in enumerate(chain[:-1], start=1):
            share = int(dist * params.tree_decay**k)
            trace.pay(ts, investors[anc], share)
            left -= share
        trace.pay(ts, investors[chain[-1]], left)
    return trace.record("ponzi", "tree")


def gen_handover(params: SchemeParams) -> ApplicationRecord:
    """Joiner i pays an escalating toll that goes wholly to joiner i - 1."""
    rng = np.random.default_rng(params.seed)
    trace = _Trace(params, rng)
    n = len(params.investments_eth) if params.investments_eth else params.n_investors
    times = _arrival_times(params, n, rng)
    joiners = [trace.new_party() for _ in range(n)]
    toll0 = _eth(params.toll_0_eth)
    for i, (ts, who) in enumerate(zip(times, joiners)):
        toll = int(round(toll0 * (1 + params.toll_growth) ** i))
        trace.receive(ts, who, toll)
        if i:
            trace.pay(ts, joiners[i - 1], toll)
    return trace.record("ponzi", "handover")


def gen_waterfall(params: SchemeParams) -> ApplicationRecord:
    """Each new stake cascades over earlier investors in join order.

    Every earlier investor is owed ``owed_fraction`` of their own stake per
    round; the cascade stops when the new fund runs out.
    """
    trace, amounts, times, investors = _setup(params)
    for i, (ts, who, v) in enumerate(zip(times, investors, amounts)):
        trace.receive(ts, who, v)
        fund = v - _fee(v, params.fee_rate)
        for j in range(i):
            if fund <= 0:
                break
            due = min(int(amounts[j] * params.owed_fraction), fund)
            trace.pay(ts, investors[j], due)
            fund -= due
    return trace.record("ponzi", "waterfall")


def gen_benign(params: SchemeParams) -> ApplicationRecord:
    """Stationary activity over the whole duration, with no boom or collapse.

    Styles: ``wallet`` (few depositors, withdrawals to an owner), ``token``
    (mostly zero-value calls) and ``game`` (bets with occasional payouts to
    the bettor). Outflows never exceed 30% of the current balance.
    """
    if params.benign_rate_per_day <= 0 or params.duration_days < 2:
        raise ValueError("benign traces need positive activity over at least two days")
    rng = np.random.default_rng(params.seed)
    trace = _Trace(params, rng)
    style = params.benign_style or BENIGN_STYLES[int(rng.integers(len(BENIGN_STYLES)))]
    if style not in BENIGN_STYLES:
        raise ValueError(f"unknown benign style {style!r}")
    horizon = params.duration_days * ONE_DAY_SECS
    mean_gap = ONE_DAY_SECS / params.benign_rate_per_day
    n_users = {"wallet": 3, "token": max(10, params.n_investors), "game": params.n_investors}[style]
    users = [trace.new_party() for _ in range(n_users)]
    owner = trace.new_party()
    selectors = [rng.bytes(4).hex() for _ in range(int(rng.integers(2, 6)))]

    t = 0.0
    times = [0]
    while True:
        t += rng.exponential(mean_gap)
        if t >= horizon:
            break
        times.append(int(t))
    times.append(horizon - int(rng.integers(0, 3600)))

    for ts in sorted(set(times)):
        ts = _START + ts
        who = users[int(rng.integers(n_users))]
        amount = _eth(round(float(rng.lognormal(params.investment_mu, params.investment_sigma)), 4))
        if style == "token":
            if rng.random() < 0.85:
                trace.receive(ts, who, 0, _TRANSFER)
            else:
                trace.receive(ts, who, amount, selectors[0])
            if trace.balance and rng.random() < 0.05:
                trace.pay(ts, owner, int(trace.balance * 0.3))
        elif style == "wallet":
            if rng.random() < 0.7 or not trace.balance:
                trace.receive(ts, who, amount, None)
            else:
                trace.receive(ts, owner, 0, _WITHDRAW)
                trace.pay(ts, owner, min(amount, int(trace.balance * 0.3)))
        else:
            sel = selectors[int(rng.integers(len(selectors)))]
            trace.receive(ts, who, amount, sel)
            if rng.random() < 0.4:
                trace.pay(ts, who, min(2 * amount, int(trace.balance * 0.3)))
    return trace.record("non_ponzi", None)


GENERATORS = {
    "chain": gen_chain,
    "tree": gen_tree,
    "handover": gen_handover,
    "waterfall": gen_waterfall,
    "benign": gen_benign,
}


def generate(params: SchemeParams) -> ApplicationRecord:
    return GENERATORS[params.scheme](params)


def random_params(scheme: str, seed: int) -> SchemeParams:
    """Draw per-application parameters from the corpus ranges."""
    rng = np.random.default_rng(seed)
    common = dict(
        scheme=scheme,
        seed=int(rng.integers(2**63)),
        investment_mu=float(rng.uniform(-2.0, 0.5)),
        investment_sigma=float(rng.uniform(0.4, 1.2)),
        contract_share=float(rng.uniform(0.0, 0.1)),
    )
    if scheme == "benign":
        return SchemeParams(
            n_investors=int(rng.integers(10, 300)),
            duration_days=int(rng.integers(15, 240)),
            benign_rate_per_day=float(rng.uniform(0.3, 5.0)),
            **common,
        )
    return SchemeParams(
        n_investors=int(rng.integers(20, 200)),
        multiplier=float(rng.uniform(1.2, 3.0)),
        fee_rate=float(rng.uniform(0.0, 0.1)),
        toll_growth=float(rng.uniform(0.01, 0.06)),
        owed_fraction=float(rng.uniform(0.05, 0.3)),
        mean_interarrival_secs=float(rng.uniform(0.5, 6.0)) * 3600,
        interest_fade=float(rng.uniform(5.0, 40.0)),
        **common,
    )


@dataclass
class Corpus:
    apps: list[ApplicationRecord]
    address_types: dict[str, bool] = field(default_factory=dict)

    @property
    def transactions(self) -> list[Transaction]:
        return [tx for app in self.apps for tx in app.txs]


def make_corpus(
    n_chain: int = 48,
    n_tree: int = 4,
    n_handover: int = 4,
    n_waterfall: int = 4,
    n_benign: int = 940,
    seed: int = 1,
) -> Corpus:
    """Mixed corpus; per-application seeds are spawned from ``seed``."""
    plan = (
        ["chain"] * n_chain
        + ["tree"] * n_tree
        + ["handover"] * n_handover
        + ["waterfall"] * n_waterfall
        + ["benign"] * n_benign
    )
    children = np.random.SeedSequence(seed).spawn(len(plan))
    apps, types = [], {}
    for scheme, child in zip(plan, children):
        app = generate(random_params(scheme, int(child.generate_state(1)[0])))
        apps.append(app)
        for tx in app.txs:
            types[tx.counterpart(app.address)] = tx.counterpart_is_contract
    return Corpus(apps, types)


def write_corpus(corpus: Corpus, out_dir, schema: str = "jsonl") -> dict[str, Path]:
    """Write transactions, labels and address types in the ingest formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "transactions": out / f"transactions.{schema}",
        "labels": out / "labels.csv",
        "address_types": out / "address_types.csv",
    }
    write_transactions(paths["transactions"], corpus.transactions, schema)
    write_labels(paths["labels"], corpus.apps)
    with paths["address_types"].open("w") as fh:
        fh.write("address,is_contract\n")
        for addr in sorted(corpus.address_types):
            fh.write(f"{addr},{int(corpus.address_types[addr])}\n")
    return paths


def balance_path(app: ApplicationRecord) -> list[int]:
    """Contract balance in wei after each transaction of the sorted trace."""
    bal, out = 0, []
    for tx in app.txs:
        bal += tx.value_wei if tx.to_addr == app.address else -tx.value_wei
        out.append(bal)
    return out


def payees_in_order(app: ApplicationRecord) -> Sequence[str]:
    return [tx.to_addr for tx in app.txs if tx.from_addr == app.address]
