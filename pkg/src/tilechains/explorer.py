"""Chain search, neighbor evaluation, and the analyst feedback loop.

A Session owns one dataset, the mined biclusters, and a background model
that absorbs every pattern the analyst marks as known. Evaluations rank
either full chains through a seed bicluster or its overlapping neighbors,
so repeated marking steers later evaluations toward unseen structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .data import Dataset, DataError, Schema, extract_relations, normalize
from .mining import Bicluster, jaccard, mine_closed_biclusters
from .scoring import (
    BackgroundTiles,
    PatternTiles,
    ScoringError,
    bicluster_to_tiles,
    build_background,
    chain_to_tiles,
    global_score,
    infer_background_model,
    local_score,
)
from .tiles import Tile, dedup_tiles

__all__ = [
    "BiclusterChain",
    "ChainScore",
    "NeighborScore",
    "DocumentEvidence",
    "EvaluationResult",
    "ModelUpdateError",
    "Session",
    "is_redescription",
]

DEFAULT_JACCARD = 0.1
DEFAULT_MIN_SUPPORT = 3


class ModelUpdateError(RuntimeError):
    """Re-inference after marking patterns failed; session was rolled back."""


@dataclass(frozen=True)
class BiclusterChain:
    """Ordered biclusters whose adjacent members overlap in a shared domain."""

    members: tuple[str, ...]
    shared_domains: tuple[str, ...]

    @property
    def id(self) -> str:
        return "|".join(self.members)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "members": list(self.members),
            "shared_domains": list(self.shared_domains),
        }


@dataclass(frozen=True)
class ChainScore:
    chain: BiclusterChain
    score: float


@dataclass(frozen=True)
class NeighborScore:
    bicluster_id: str
    score: float
    opacity: float


@dataclass(frozen=True)
class DocumentEvidence:
    doc_id: str
    content: str
    entities: tuple[str, ...]


@dataclass
class EvaluationResult:
    ranked: list
    warnings: list[str] = field(default_factory=list)


def is_redescription(
    b: Bicluster,
    c: Bicluster,
    b_side: frozenset[int] | None,
    c_side: frozenset[int] | None,
    threshold: float,
) -> bool:
    """Overlap test on the two entity sets in a shared domain.

    Sides are resolved by the caller (which knows the schema); a missing
    side means the domain is not shared and the test is simply false.
    """
    if b_side is None or c_side is None:
        return False
    return jaccard(b_side, c_side) >= threshold


class Session:
    """Mutable analyst state: data, patterns, and the evolving background.

    Parameters
    ----------
    dataset : Dataset
    mode : "binary" or "real"
    domain_order : explicit ordering of every domain id; defaults to the
        load order.
    min_support : left-side support floor for mining.
    jaccard_threshold : redescription threshold for chain adjacency and
        neighbor search.
    score_kind : "local" (default) or "global".
    seed : seed for real-model initialization.
    """

    def __init__(
        self,
        dataset: Dataset,
        mode: str = "binary",
        domain_order: list[str] | None = None,
        min_support: int = DEFAULT_MIN_SUPPORT,
        jaccard_threshold: float = DEFAULT_JACCARD,
        score_kind: str = "local",
        seed: int = 0,
    ):
        if mode not in ("binary", "real"):
            raise DataError(f"unknown mode {mode!r}")
        if score_kind not in ("local", "global"):
            raise DataError(f"unknown score kind {score_kind!r}")
        self.dataset = dataset
        self.mode = mode
        self.min_support = min_support
        self.jaccard_threshold = jaccard_threshold
        self.score_kind = score_kind
        self.seed = seed

        if mode == "binary":
            self.matrix = dataset.matrix.binarize()
        else:
            self.matrix = normalize(dataset.matrix)

        order = domain_order or [d.id for d in dataset.domains]
        if set(order) != {d.id for d in dataset.domains}:
            raise DataError("domain order must list every domain exactly once")
        self.schema: Schema = extract_relations(self.matrix, dataset.domains, order)

        self.biclusters: dict[str, Bicluster] = {}
        self.by_relation: dict[str, list[Bicluster]] = {}
        for rel in self.schema.relations:
            mined = mine_closed_biclusters(rel, min_support)
            self.by_relation[rel.id] = mined
            for b in mined:
                self.biclusters[b.id] = b

        self.background: BackgroundTiles = build_background(
            self.matrix, list(self.schema.domains)
        )
        self.known_tiles: list[Tile] = []
        self.model = infer_background_model(
            self.background.all(), self.matrix, seed=seed
        )

    # -- schema helpers ----------------------------------------------------

    def _relation_index(self, relation_id: str) -> int:
        for k, rel in enumerate(self.schema.relations):
            if rel.id == relation_id:
                return k
        raise KeyError(relation_id)

    def _relation_of(self, b: Bicluster):
        return self.schema.relations[self._relation_index(b.relation)]

    def _side(self, b: Bicluster, domain_id: str) -> frozenset[int] | None:
        return b.side(domain_id, self._relation_of(b))

    def bicluster(self, bicluster_id: str) -> Bicluster:
        try:
            return self.biclusters[bicluster_id]
        except KeyError:
            raise KeyError(f"unknown bicluster {bicluster_id!r}") from None

    # -- chain search --------------------------------------------------------

    def full_path_search(self, seed_id: str) -> list[BiclusterChain]:
        """All maximal chains through the seed.

        Depth-first extension toward both ends of the relation order; the
        left-going and right-going partial paths are combined pairwise. A
        path ends where the schema ends or no neighbor passes the
        redescription threshold.
        """
        seed = self.bicluster(seed_id)
        t = self._relation_index(seed.relation)

        def successors(b: Bicluster, rel_idx: int, direction: int) -> list[Bicluster]:
            nxt = rel_idx + direction
            if nxt < 0 or nxt >= len(self.schema.relations):
                return []
            shared = (
                self.schema.domains[rel_idx + 1].id
                if direction > 0
                else self.schema.domains[rel_idx].id
            )
            side = self._side(b, shared)
            out = []
            for cand in self.by_relation[self.schema.relations[nxt].id]:
                if is_redescription(
                    b, cand, side, self._side(cand, shared), self.jaccard_threshold
                ):
                    out.append(cand)
            return out

        def paths_from(b: Bicluster, rel_idx: int, direction: int) -> list[list[str]]:
            exts = successors(b, rel_idx, direction)
            if not exts:
                return [[b.id]]
            collected = []
            for nxt in exts:
                for tail in paths_from(nxt, rel_idx + direction, direction):
                    collected.append([b.id] + tail)
            return collected

        lefts = paths_from(seed, t, -1)
        rights = paths_from(seed, t, +1)
        chains = []
        seen = set()
        for lp in lefts:
            for rp in rights:
                members = tuple(reversed(lp)) + tuple(rp[1:])
                if members in seen:
                    continue
                seen.add(members)
                start = t - (len(lp) - 1)
                shared = tuple(
                    self.schema.domains[start + k + 1].id
                    for k in range(len(members) - 1)
                )
                chains.append(BiclusterChain(members, shared))
        return chains

    def full_path_evaluate(self, seed_id: str) -> EvaluationResult:
        """Score and rank every chain through the seed, best first.

        Ties break toward shorter chains, then lexicographic member ids.
        A chain whose scoring fails is skipped with a warning entry.
        """
        scored = []
        result = EvaluationResult(ranked=scored)
        for chain in self.full_path_search(seed_id):
            tiles = chain_to_tiles(
                chain.id, [self.bicluster(m) for m in chain.members], self.matrix
            )
            try:
                scored.append(ChainScore(chain, self._score(tiles)))
            except ScoringError as exc:
                result.warnings.append(str(exc))
        scored.sort(key=lambda cs: (-cs.score, len(cs.chain.members), cs.chain.members))
        return result

    # -- stepwise evaluation -------------------------------------------------

    def neighbors(self, seed_id: str) -> list[Bicluster]:
        """Biclusters overlapping the seed in a shared domain, seed's own
        relation included."""
        seed = self.bicluster(seed_id)
        t = self._relation_index(seed.relation)
        out = []
        for k in (t - 1, t, t + 1):
            if k < 0 or k >= len(self.schema.relations):
                continue
            rel = self.schema.relations[k]
            shared_domains = {rel.left_domain, rel.right_domain} & {
                self.schema.relations[t].left_domain,
                self.schema.relations[t].right_domain,
            }
            for cand in self.by_relation[rel.id]:
                if cand.id == seed.id:
                    continue
                if any(
                    is_redescription(
                        seed,
                        cand,
                        self._side(seed, dom),
                        self._side(cand, dom),
                        self.jaccard_threshold,
                    )
                    for dom in sorted(shared_domains)
                ):
                    out.append(cand)
        return out

    def stepwise_evaluate(self, seed_id: str) -> EvaluationResult:
        """Score the seed's neighbors and map scores linearly to opacities.

        The neighbor with the lowest score maps to opacity 0, the highest
        to 1; a degenerate range (single neighbor or equal scores) maps
        everything to 1.
        """
        scored: list[tuple[Bicluster, float]] = []
        result = EvaluationResult(ranked=[])
        for cand in self.neighbors(seed_id):
            tiles = bicluster_to_tiles(cand, self.matrix)
            try:
                scored.append((cand, self._score(tiles)))
            except ScoringError as exc:
                result.warnings.append(str(exc))
        if not scored:
            return result
        finite = [s for _, s in scored if math.isfinite(s)]
        lo = min(finite) if finite else 0.0
        hi = max(finite) if finite else 0.0
        span = hi - lo

        def opacity(score: float) -> float:
            if score == math.inf:
                return 1.0
            if span <= 0.0:
                return 1.0
            return (score - lo) / span

        result.ranked = sorted(
            (
                NeighborScore(b.id, s, opacity(s))
                for b, s in scored
            ),
            key=lambda ns: (-ns.score, ns.bicluster_id),
        )
        return result

    # -- scoring and feedback --------------------------------------------------

    def _score(self, tiles: PatternTiles) -> float:
        if self.score_kind == "global":
            return global_score(
                tiles, self.background, self.model, self.matrix, seed=self.seed
            )
        return local_score(tiles, self.model, self.matrix)

    def score_pattern(self, pattern_id: str, score_kind: str | None = None) -> float:
        kind = score_kind or self.score_kind
        tiles = self.pattern_tiles(pattern_id)
        if kind == "global":
            return global_score(
                tiles, self.background, self.model, self.matrix, seed=self.seed
            )
        return local_score(tiles, self.model, self.matrix)

    def pattern_tiles(self, pattern_id: str) -> PatternTiles:
        if "|" in pattern_id:
            members = [self.bicluster(m) for m in pattern_id.split("|")]
            return chain_to_tiles(pattern_id, members, self.matrix)
        return bicluster_to_tiles(self.bicluster(pattern_id), self.matrix)

    def mark_known(self, pattern_ids: list[str]) -> "Session":
        """Fold the patterns' tiles into the background and re-infer.

        Marking nothing new is a no-op; a failed re-inference rolls the
        session back to the previous model and raises ModelUpdateError.
        """
        new_tiles = []
        for pid in pattern_ids:
            new_tiles.extend(self.pattern_tiles(pid).tiles)
        have = {t.key for t in self.background.all()} | {t.key for t in self.known_tiles}
        added = [t for t in dedup_tiles(new_tiles) if t.key not in have]
        if not added:
            return self
        added.sort(key=lambda t: (sorted(t.rows), sorted(t.cols)))

        prev_known = list(self.known_tiles)
        prev_model = self.model
        tiles = self.background.all() + prev_known + added
        try:
            init = self._warm_init(tiles)
            self.model = infer_background_model(
                tiles, self.matrix, seed=self.seed, init=init
            )
            self.known_tiles = prev_known + added
        except Exception as exc:
            self.model = prev_model
            self.known_tiles = prev_known
            raise ModelUpdateError(f"model update failed: {exc}") from exc
        return self

    def _warm_init(self, tiles: list[Tile]):
        if self.mode == "binary":
            return self.model.cell_prob_
        from .scoring import _warm_lambdas

        return _warm_lambdas(tiles, self.model)

    # -- evidence ---------------------------------------------------------------

    def documents_for(self, bicluster_id: str) -> list[DocumentEvidence]:
        """Documents containing at least one full entity pair of the bicluster."""
        b = self.bicluster(bicluster_id)
        row_cols: dict[int, set[int]] = {}
        for (i, j) in self.matrix.values:
            row_cols.setdefault(i, set()).add(j)
        member_cols = b.left | b.right
        rows = set()
        for i, cols in row_cols.items():
            if any(e in cols and f in cols for e in b.left for f in b.right):
                rows.add(i)
        labels = self.dataset.entity_labels
        out = []
        for i in sorted(rows):
            doc_id = self.dataset.doc_ids[i]
            present = tuple(
                labels[j] for j in sorted(row_cols[i] & member_cols)
            )
            out.append(
                DocumentEvidence(
                    doc_id, self.dataset.doc_texts.get(doc_id, ""), present
                )
            )
        return out
