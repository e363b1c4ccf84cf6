"""Transaction matrices, entity domains, and co-occurrence relation extraction.

The central object is a sparse document-by-entity matrix together with a
partition of its columns into entity domains (people, locations, ...).
Pairwise relations between adjacent domains are derived from row-level
co-occurrence and assembled into a linear multi-relational schema.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "DataError",
    "DomainConflictError",
    "TransactionMatrix",
    "EntityDomain",
    "Relation",
    "Schema",
    "Dataset",
    "load_transactions",
    "normalize",
    "extract_relations",
    "read_records",
]


class DataError(ValueError):
    """Raised when input records or matrix contents violate a contract."""


class DomainConflictError(DataError):
    """Raised when one entity label is claimed by two different domains."""

    def __init__(self, entity: str, first: str, second: str):
        self.entity = entity
        self.domains = (first, second)
        super().__init__(
            f"entity {entity!r} appears under two domains: {first!r} and {second!r}"
        )


@dataclass(frozen=True)
class TransactionMatrix:
    """Sparse N-documents-by-M-entities matrix; absent cells are zero.

    mode "binary": every stored value is exactly 1.
    mode "real": stored values are positive counts or, after ``normalize``,
    fractions in (0, 1].
    """

    n_rows: int
    n_cols: int
    values: dict[tuple[int, int], float]
    mode: str = "real"

    def __post_init__(self):
        if self.mode not in ("binary", "real"):
            raise DataError(f"unknown matrix mode {self.mode!r}")
        for (i, j), v in self.values.items():
            if not (0 <= i < self.n_rows and 0 <= j < self.n_cols):
                raise DataError(f"cell ({i},{j}) outside {self.n_rows}x{self.n_cols}")
            if self.mode == "binary" and v != 1:
                raise DataError(f"binary matrix stores value {v} at ({i},{j})")
            if v <= 0:
                raise DataError(f"non-positive stored value {v} at ({i},{j})")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def value(self, i: int, j: int) -> float:
        return self.values.get((i, j), 0.0)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        for (i, j), v in self.values.items():
            dense[i, j] = v
        return dense

    def binarize(self) -> "TransactionMatrix":
        """Presence/absence view: every nonzero cell becomes 1."""
        return TransactionMatrix(
            self.n_rows, self.n_cols, {k: 1.0 for k in self.values}, mode="binary"
        )

    def row_entities(self, i: int) -> set[int]:
        return {j for (r, j) in self.values if r == i}

    def to_json(self) -> dict:
        cells = sorted(self.values.items())
        return {
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "mode": self.mode,
            "cells": [[i, j, v] for (i, j), v in cells],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TransactionMatrix":
        values = {(int(i), int(j)): float(v) for i, j, v in obj["cells"]}
        return cls(int(obj["n_rows"]), int(obj["n_cols"]), values, obj["mode"])


@dataclass(frozen=True)
class EntityDomain:
    """A universe of entities occupying a block of matrix columns."""

    id: str
    name: str
    entity_ids: tuple[int, ...]

    def __contains__(self, col: int) -> bool:
        return col in set(self.entity_ids)


@dataclass(frozen=True)
class Relation:
    """Co-occurrence pairs between two entity domains."""

    left_domain: str
    right_domain: str
    pairs: frozenset[tuple[int, int]]

    @property
    def id(self) -> str:
        return f"{self.left_domain}~{self.right_domain}"

    def left_entities(self) -> set[int]:
        return {e for e, _ in self.pairs}

    def right_entities(self) -> set[int]:
        return {f for _, f in self.pairs}


@dataclass(frozen=True)
class Schema:
    """Linear multi-relational schema: ordered domains chained by relations."""

    domains: tuple[EntityDomain, ...]
    relations: tuple[Relation, ...]

    def __post_init__(self):
        if len(self.relations) != max(len(self.domains) - 1, 0):
            raise DataError("schema relations must chain adjacent domains")
        for k, rel in enumerate(self.relations):
            if (rel.left_domain, rel.right_domain) != (
                self.domains[k].id,
                self.domains[k + 1].id,
            ):
                raise DataError(f"relation {k} does not join adjacent domains")

    def domain(self, domain_id: str) -> EntityDomain:
        for dom in self.domains:
            if dom.id == domain_id:
                return dom
        raise KeyError(domain_id)


@dataclass
class Dataset:
    """A loaded corpus: matrix, domain partition, and label bookkeeping."""

    matrix: TransactionMatrix
    domains: list[EntityDomain]
    doc_ids: list[str]
    entity_labels: list[str]
    doc_texts: dict[str, str] = field(default_factory=dict)

    def domain_of(self, col: int) -> EntityDomain:
        for dom in self.domains:
            if col in dom.entity_ids:
                return dom
        raise KeyError(col)

    def entity_index(self, label: str) -> int:
        return self.entity_labels.index(label)

    def to_json(self) -> dict:
        return {
            "matrix": self.matrix.to_json(),
            "domains": [
                {"id": d.id, "name": d.name, "entity_ids": list(d.entity_ids)}
                for d in self.domains
            ],
            "doc_ids": self.doc_ids,
            "entity_labels": self.entity_labels,
            "doc_texts": self.doc_texts,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Dataset":
        return cls(
            matrix=TransactionMatrix.from_json(obj["matrix"]),
            domains=[
                EntityDomain(d["id"], d["name"], tuple(d["entity_ids"]))
                for d in obj["domains"]
            ],
            doc_ids=list(obj["doc_ids"]),
            entity_labels=list(obj["entity_labels"]),
            doc_texts=dict(obj.get("doc_texts", {})),
        )


Record = tuple[str, str, str, float]


def load_transactions(records: Iterable[Record]) -> Dataset:
    """Build a count matrix from (doc_id, entity, domain, count) records.

    Rows and columns are indexed in first-seen order; repeated (doc, entity)
    pairs have their counts summed; zero-count cells are dropped after
    summation. Every entity must stay inside a single domain.
    """
    doc_index: dict[str, int] = {}
    ent_index: dict[str, int] = {}
    ent_domain: dict[str, str] = {}
    sums: dict[tuple[int, int], float] = {}
    n_records = 0
    for doc_id, entity, domain, count in records:
        n_records += 1
        count = float(count)
        if count < 0:
            raise DataError(f"negative count {count} for ({doc_id!r}, {entity!r})")
        seen = ent_domain.get(entity)
        if seen is None:
            ent_domain[entity] = domain
        elif seen != domain:
            raise DomainConflictError(entity, seen, domain)
        if doc_id not in doc_index:
            doc_index[doc_id] = len(doc_index)
        if entity not in ent_index:
            ent_index[entity] = len(ent_index)
        key = (doc_index[doc_id], ent_index[entity])
        sums[key] = sums.get(key, 0.0) + count
    if n_records == 0:
        raise DataError("no input records")

    values = {k: v for k, v in sums.items() if v > 0}
    matrix = TransactionMatrix(len(doc_index), len(ent_index), values, mode="real")

    by_domain: dict[str, list[int]] = {}
    for entity, col in ent_index.items():
        by_domain.setdefault(ent_domain[entity], []).append(col)
    domains = [
        EntityDomain(name, name, tuple(sorted(cols)))
        for name, cols in by_domain.items()
    ]
    labels = [None] * len(ent_index)
    for entity, col in ent_index.items():
        labels[col] = entity
    docs = [None] * len(doc_index)
    for doc, row in doc_index.items():
        docs[row] = doc
    return Dataset(matrix, domains, docs, labels)


def normalize(matrix: TransactionMatrix) -> TransactionMatrix:
    """Divide every value by the global maximum so the largest becomes 1."""
    if not matrix.values:
        raise DataError("cannot normalize an all-zero matrix")
    peak = max(matrix.values.values())
    values = {k: v / peak for k, v in matrix.values.items()}
    return TransactionMatrix(matrix.n_rows, matrix.n_cols, values, mode="real")


def extract_relations(
    matrix: TransactionMatrix,
    domains: Sequence[EntityDomain],
    domain_order: Sequence[str],
) -> Schema:
    """Derive the linear schema whose relations hold row co-occurrence pairs.

    For each adjacent domain pair in ``domain_order``, (e, f) is a relation
    pair exactly when e and f appear together in at least one row.
    """
    if len(domain_order) < 2:
        raise DataError("domain order needs at least two domains")
    by_id = {d.id: d for d in domains}
    ordered = []
    for did in domain_order:
        if did not in by_id:
            raise DataError(f"unknown domain {did!r}")
        ordered.append(by_id[did])

    row_cols: dict[int, list[int]] = {}
    for (i, j) in matrix.values:
        row_cols.setdefault(i, []).append(j)

    relations = []
    for left, right in zip(ordered, ordered[1:]):
        left_set = set(left.entity_ids)
        right_set = set(right.entity_ids)
        pairs = set()
        for cols in row_cols.values():
            es = [c for c in cols if c in left_set]
            fs = [c for c in cols if c in right_set]
            pairs.update((e, f) for e in es for f in fs)
        relations.append(Relation(left.id, right.id, frozenset(pairs)))
    return Schema(tuple(ordered), tuple(relations))


def read_records(path: str | Path) -> Iterator[Record]:
    """Stream records from a CSV (header doc_id,entity,domain,count) or JSONL file."""
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                yield (obj["doc_id"], obj["entity"], obj["domain"], float(obj["count"]))
        return
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"doc_id", "entity", "domain", "count"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(
                f"{path} must have header columns doc_id,entity,domain,count"
            )
        for row in reader:
            yield (row["doc_id"], row["entity"], row["domain"], float(row["count"]))
