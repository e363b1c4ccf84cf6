"""Closed bicluster enumeration over a single entity-entity relation.

A bicluster (left set, right set) is closed when neither side can grow
without breaking full cross-connection. Treating left entities as
transactions and right entities as items, closed biclusters are exactly
the closed itemsets paired with their full support sets. Enumeration is
depth-first over prefix-preserving closure extensions, which visits every
closed itemset once without storing previously emitted results.
"""

from __future__ import annotations

from dataclasses import dataclass

from sklearn.base import BaseEstimator

from .data import Relation

__all__ = ["Bicluster", "ClosedBiclusterMiner", "mine_closed_biclusters", "jaccard"]


@dataclass(frozen=True)
class Bicluster:
    id: str
    relation: str
    left: frozenset[int]
    right: frozenset[int]

    def side(self, domain_id: str, relation: Relation) -> frozenset[int] | None:
        """Entity set living in ``domain_id``, or None if not a member domain."""
        if domain_id == relation.left_domain:
            return self.left
        if domain_id == relation.right_domain:
            return self.right
        return None

    def to_json(self, labels: list[str] | None = None) -> dict:
        if labels is None:
            left = sorted(self.left)
            right = sorted(self.right)
        else:
            left = [labels[e] for e in sorted(self.left)]
            right = [labels[e] for e in sorted(self.right)]
        return {"id": self.id, "relation": self.relation, "left": left, "right": right}


def jaccard(a: frozenset, b: frozenset) -> float:
    """|a & b| / |a | b|, taken as 0 when both sets are empty."""
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def mine_closed_biclusters(relation: Relation, min_support: int = 3) -> list[Bicluster]:
    """All closed biclusters with at least ``min_support`` left entities.

    Returned in deterministic order (lexicographic left then right entity
    lists) with ids derived from the relation id and that order.
    """
    if min_support < 1:
        raise ValueError("min_support must be at least 1")
    if not relation.pairs:
        return []

    items_of: dict[int, frozenset[int]] = {}
    tids_of: dict[int, set[int]] = {}
    grouped: dict[int, set[int]] = {}
    for e, f in relation.pairs:
        grouped.setdefault(e, set()).add(f)
        tids_of.setdefault(f, set()).add(e)
    items_of = {e: frozenset(fs) for e, fs in grouped.items()}
    all_items = sorted(tids_of)
    all_lefts = frozenset(items_of)

    def closure(support: frozenset[int]) -> frozenset[int]:
        it = iter(support)
        closed = set(items_of[next(it)])
        for e in it:
            closed &= items_of[e]
            if not closed:
                break
        return frozenset(closed)

    found: list[tuple[frozenset[int], frozenset[int]]] = []

    def expand(itemset: frozenset[int], support: frozenset[int], core: int) -> None:
        if itemset:
            found.append((support, itemset))
        for f in all_items:
            if f <= core or f in itemset:
                continue
            sub = support & tids_of[f]
            if len(sub) < min_support:
                continue
            closed = closure(frozenset(sub))
            if any(g < f and g not in itemset for g in closed):
                continue  # prefix not preserved: reached via a smaller item
            expand(closed, frozenset(sub), f)

    if len(all_lefts) >= min_support:
        expand(closure(all_lefts), all_lefts, -1)

    found.sort(key=lambda sf: (sorted(sf[0]), sorted(sf[1])))
    return [
        Bicluster(f"{relation.id}:b{k}", relation.id, left, right)
        for k, (left, right) in enumerate(found)
    ]


class ClosedBiclusterMiner(BaseEstimator):
    """Estimator wrapper: ``fit(relation)`` exposes ``biclusters_``."""

    def __init__(self, min_support: int = 3):
        self.min_support = min_support

    def fit(self, relation: Relation, y=None):
        self.biclusters_ = mine_closed_biclusters(relation, self.min_support)
        return self
