import itertools

import pytest

from ponzitrace.ingest import ApplicationRecord, Transaction

APP = "0x" + "a" * 40
_counter = itertools.count()


def addr(i: int) -> str:
    return "0x" + f"{i:040x}"


def tx(ts, frm, to, value, kind="normal", status="success", selector=None, contract=False, h=None):
    """Transaction with a fresh unique hash unless ``h`` is given."""
    h = h or "0x" + f"{next(_counter):064x}"
    return Transaction(h, int(ts), frm, to, int(value), kind, status, selector, contract)


def app(txs, label="ponzi", ptype="chain", address=APP, created_at=None):
    return ApplicationRecord(address, label, ptype if label == "ponzi" else None, tuple(txs), created_at)


@pytest.fixture
def simple_app():
    """Two investors, one payout, lifetime of two days."""
    a, b = addr(1), addr(2)
    base = 1_600_000_000
    return app(
        [
            tx(base, a, APP, 10**18, selector="d0e30db0"),
            tx(base + 3600, b, APP, 3 * 10**18, selector="d0e30db0"),
            tx(base + 7200, APP, a, 2 * 10**18, kind="internal"),
            tx(base + 2 * 86_400, b, APP, 0, selector="3ccfd60b"),
        ]
    )


@pytest.fixture(scope="session")
def small_dataset():
    """A few hundred synthetic applications after refinement."""
    from ponzitrace.ingest import refine_dataset
    from ponzitrace.synthgen import make_corpus

    return refine_dataset(make_corpus(16, 4, 4, 4, 160, seed=2).apps)


@pytest.fixture(scope="session")
def small_table(small_dataset):
    from ponzitrace.features import build_feature_table

    return build_feature_table(small_dataset, "acc-ts", 24)
