import numpy as np
import pytest

from tilechains.data import TransactionMatrix, load_transactions
from tilechains.tiles import Tile

FIXTURES = __file__.rsplit("/", 1)[0] + "/fixtures"

ACCEPTANCE_LABELS = {
    "test_a01": "A1  binary iterative scaling satisfies margin targets fast",
    "test_a02": "A2  exact tiles pin cells; uncovered cells stay at 1/2",
    "test_a03": "A3  cell probabilities match brute-force entropy maximizer",
    "test_a04": "A4  analytic dual gradient matches finite differences",
    "test_a05": "A5  real model matches tile moments at convergence",
    "test_a06": "A6  score identities (KL forms, zero for known patterns)",
    "test_a07": "A7  marking a pattern known zeroes its scores",
    "test_a08": "A8  closed bicluster mining equals brute-force enumeration",
    "test_a09": "A9  chain search equals exhaustive chain enumeration",
    "test_a10": "A10 benchmark runtime trends (size, density, global vs local)",
    "test_a11": "A11 pipeline golden run is byte-identical and matches counts",
}

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    if report.outcome == "skipped":
        return
    test_name = report.nodeid.split("::")[-1].split("[")[0]
    key = test_name.split("_", 2)
    prefix = f"{key[0]}_{key[1]}"
    if prefix in ACCEPTANCE_LABELS:
        prev = _acceptance_outcomes.get(prefix)
        outcome = report.outcome if prev in (None, "passed") else prev
        _acceptance_outcomes[prefix] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for prefix in sorted(_acceptance_outcomes):
        verdict = "PASS" if _acceptance_outcomes[prefix] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {ACCEPTANCE_LABELS[prefix]}")


def dataset_from_docs(docs: dict[str, list[tuple[str, str]]], counts=None):
    """docs: doc_id -> [(entity, domain), ...]; counts default to 1."""
    records = []
    for doc_id, ents in docs.items():
        for entity, domain in ents:
            c = 1 if counts is None else counts.get((doc_id, entity), 1)
            records.append((doc_id, entity, domain, c))
    return load_transactions(records)


def dense_to_matrix(dense, mode="binary") -> TransactionMatrix:
    dense = np.asarray(dense, dtype=float)
    values = {
        (int(i), int(j)): float(dense[i, j]) for i, j in zip(*np.nonzero(dense))
    }
    return TransactionMatrix(dense.shape[0], dense.shape[1], values, mode=mode)


def binary_margin_tiles(dense) -> list[Tile]:
    dense = np.asarray(dense, dtype=float)
    n, m = dense.shape
    tiles = [
        Tile(frozenset([i]), frozenset(range(m)), freq=float(dense[i].mean()))
        for i in range(n)
    ]
    tiles += [
        Tile(frozenset(range(n)), frozenset([j]), freq=float(dense[:, j].mean()))
        for j in range(m)
    ]
    return tiles


def real_margin_tiles(dense) -> list[Tile]:
    dense = np.asarray(dense, dtype=float)
    n, m = dense.shape
    sq = dense**2
    tiles = [
        Tile(
            frozenset([i]),
            frozenset(range(m)),
            total=float(dense[i].sum()),
            total_sq=float(sq[i].sum()),
        )
        for i in range(n)
    ]
    tiles += [
        Tile(
            frozenset(range(n)),
            frozenset([j]),
            total=float(dense[:, j].sum()),
            total_sq=float(sq[:, j].sum()),
        )
        for j in range(m)
    ]
    return tiles


@pytest.fixture
def toy_dataset():
    return dataset_from_docs(
        {
            "d1": [("p1", "Person"), ("p2", "Person"), ("l1", "Location")],
            "d2": [("p1", "Person"), ("p2", "Person"), ("l1", "Location"), ("l2", "Location")],
            "d3": [("p1", "Person"), ("p2", "Person"), ("p3", "Person"), ("l2", "Location"), ("t1", "Date")],
            "d4": [("p3", "Person"), ("l2", "Location"), ("t1", "Date")],
            "d5": [("p4", "Person"), ("l3", "Location"), ("t2", "Date")],
            "d6": [("p4", "Person"), ("l3", "Location"), ("t2", "Date")],
            "d7": [("p1", "Person"), ("l1", "Location"), ("t1", "Date")],
        }
    )
