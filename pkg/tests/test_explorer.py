import math
from itertools import product

import numpy as np
import pytest

from tilechains.explorer import ModelUpdateError, Session, is_redescription
from tilechains.mining import Bicluster, jaccard

from conftest import dataset_from_docs


def three_domain_dataset():
    """Two relations (D1-D2, D2-D3) with known overlap structure."""
    return dataset_from_docs(
        {
            "d1": [("a1", "D1"), ("a2", "D1"), ("e1", "D2"), ("e2", "D2")],
            "d2": [("a1", "D1"), ("a2", "D1"), ("e1", "D2"), ("e2", "D2"), ("c1", "D3")],
            "d3": [("a3", "D1"), ("e3", "D2"), ("c1", "D3"), ("c2", "D3")],
            "d4": [("a3", "D1"), ("e3", "D2"), ("c2", "D3")],
            "d5": [("e1", "D2"), ("e2", "D2"), ("c1", "D3"), ("c2", "D3")],
            "d6": [("a4", "D1"), ("e4", "D2"), ("c3", "D3")],
            "d7": [("a4", "D1"), ("e4", "D2"), ("c3", "D3")],
        }
    )


def chain_enumeration_oracle(session, seed_id):
    """Exhaustive maximal-chain enumeration over contiguous relation spans."""
    rels = session.schema.relations
    by_rel = session.by_relation

    def ok(left_b, right_b, domain_id):
        return is_redescription(
            left_b,
            right_b,
            session._side(left_b, domain_id),
            session._side(right_b, domain_id),
            session.jaccard_threshold,
        )

    seed = session.bicluster(seed_id)
    seed_idx = next(k for k, r in enumerate(rels) if r.id == seed.relation)
    valid = []
    for start in range(len(rels)):
        for end in range(start, len(rels)):
            if not (start <= seed_idx <= end):
                continue
            pools = [by_rel[rels[k].id] for k in range(start, end + 1)]
            for combo in product(*pools):
                if combo[seed_idx - start].id != seed_id:
                    continue
                if all(
                    ok(combo[k], combo[k + 1], session.schema.domains[start + k + 1].id)
                    for k in range(len(combo) - 1)
                ):
                    valid.append((start, combo))
    maximal = []
    for start, combo in valid:
        end = start + len(combo) - 1
        extensible = False
        if start > 0:
            for cand in by_rel[rels[start - 1].id]:
                if ok(cand, combo[0], session.schema.domains[start].id):
                    extensible = True
        if end < len(rels) - 1:
            for cand in by_rel[rels[end + 1].id]:
                if ok(combo[-1], cand, session.schema.domains[end + 1].id):
                    extensible = True
        if not extensible:
            maximal.append(tuple(b.id for b in combo))
    return set(maximal)


class TestRedescription:
    def test_threshold_met(self):
        assert jaccard(frozenset("ab"), frozenset("bc")) >= 0.3

    def test_exact_redescription_at_one(self):
        b = Bicluster("b", "r", frozenset([1]), frozenset([2, 3]))
        c = Bicluster("c", "r2", frozenset([2, 3]), frozenset([4]))
        assert is_redescription(b, c, b.right, c.left, 1.0)

    def test_disjoint_never(self):
        b = Bicluster("b", "r", frozenset([1]), frozenset([2]))
        c = Bicluster("c", "r2", frozenset([3]), frozenset([4]))
        assert not is_redescription(b, c, b.right, c.left, 0.01)

    def test_missing_side_is_false_not_error(self):
        b = Bicluster("b", "r", frozenset([1]), frozenset([2]))
        c = Bicluster("c", "r2", frozenset([2]), frozenset([4]))
        assert not is_redescription(b, c, None, c.left, 0.1)


class TestFullPathSearch:
    def test_two_relation_adjacency_seeded_in_left_relation(self):
        """Four overlapping bundles across two relations: a middle seed
        reaches exactly its redescription partners on the other relation."""
        session = Session(three_domain_dataset(), min_support=1, jaccard_threshold=0.1)
        # pick the bicluster whose D2 side is {e1,e2} with both a1,a2
        seeds = [
            b
            for b in session.biclusters.values()
            if b.relation == "D1~D2" and session.dataset.entity_labels[sorted(b.left)[0]] == "a1"
        ]
        assert seeds
        chains = session.full_path_search(seeds[0].id)
        assert all(len(c.members) == 2 for c in chains)
        oracle = chain_enumeration_oracle(session, seeds[0].id)
        assert {c.members for c in chains} == oracle

    def test_isolated_seed_returns_singleton(self):
        docs = {
            "d1": [("x1", "A"), ("y1", "B")],
            "d2": [("x2", "A"), ("y2", "B"), ("z1", "C")],
            "d3": [("x2", "A"), ("y2", "B"), ("z1", "C")],
        }
        session = Session(dataset_from_docs(docs), min_support=1, jaccard_threshold=0.5)
        isolated = [
            b
            for b in session.biclusters.values()
            if b.relation == "A~B"
            and session.dataset.entity_labels[sorted(b.right)[0]] == "y1"
        ]
        chains = session.full_path_search(isolated[0].id)
        assert [c.members for c in chains] == [(isolated[0].id,)]

    @pytest.mark.parametrize("seed_val", range(8))
    def test_matches_exhaustive_enumeration(self, seed_val):
        rng = np.random.default_rng(seed_val)
        docs = {}
        domains = ["A", "B", "C", "D"]
        pools = {
            "A": [f"a{k}" for k in range(4)],
            "B": [f"b{k}" for k in range(4)],
            "C": [f"c{k}" for k in range(4)],
            "D": [f"d{k}" for k in range(3)],
        }
        for d in range(10):
            ents = []
            for dom in domains:
                picks = rng.choice(
                    pools[dom], size=rng.integers(1, 3), replace=False
                )
                ents.extend((p, dom) for p in picks)
            docs[f"doc{d}"] = ents
        session = Session(
            dataset_from_docs(docs),
            domain_order=domains,
            min_support=2,
            jaccard_threshold=0.25,
        )
        if len(session.biclusters) > 10:
            return  # keep the exhaustive oracle tractable
        for seed_id in sorted(session.biclusters):
            got = {c.members for c in session.full_path_search(seed_id)}
            assert got == chain_enumeration_oracle(session, seed_id)

    def test_chain_invariants_hold(self):
        session = Session(three_domain_dataset(), min_support=1, jaccard_threshold=0.1)
        for seed_id in sorted(session.biclusters):
            for chain in session.full_path_search(seed_id):
                assert len(set(chain.members)) == len(chain.members)
                assert len(chain.shared_domains) == len(chain.members) - 1
                for k in range(len(chain.members) - 1):
                    b = session.bicluster(chain.members[k])
                    c = session.bicluster(chain.members[k + 1])
                    dom = chain.shared_domains[k]
                    assert is_redescription(
                        b,
                        c,
                        session._side(b, dom),
                        session._side(c, dom),
                        session.jaccard_threshold,
                    )


class TestFullPathEvaluate:
    def test_single_candidate_rank_one(self):
        session = Session(three_domain_dataset(), min_support=1, jaccard_threshold=0.9)
        seed_id = sorted(session.biclusters)[0]
        result = session.full_path_evaluate(seed_id)
        assert len(result.ranked) >= 1
        assert result.ranked[0].score == max(cs.score for cs in result.ranked)

    def test_rank_deterministic(self):
        session = Session(three_domain_dataset(), min_support=1, jaccard_threshold=0.1)
        seed_id = sorted(session.biclusters)[0]
        a = session.full_path_evaluate(seed_id)
        b = session.full_path_evaluate(seed_id)
        assert [(cs.chain.id, cs.score) for cs in a.ranked] == [
            (cs.chain.id, cs.score) for cs in b.ranked
        ]

    def test_known_chain_ranks_below_fresh_one(self):
        session = Session(three_domain_dataset(), min_support=1, jaccard_threshold=0.1)
        seed_id = next(
            bid for bid in sorted(session.biclusters) if bid.startswith("D2~D3")
        )
        before = session.full_path_evaluate(seed_id)
        assert len(before.ranked) >= 2
        top_chain = before.ranked[0].chain
        session.mark_known(list(top_chain.members))
        after = session.full_path_evaluate(seed_id)
        scores = {cs.chain.id: cs.score for cs in after.ranked}
        assert scores[top_chain.id] == 0.0
        assert after.ranked[0].chain.id != top_chain.id


class TestStepwise:
    def test_opacity_linear_map(self):
        session = Session(three_domain_dataset(), min_support=1, jaccard_threshold=0.05)
        seed_id = next(
            bid for bid in sorted(session.biclusters) if bid.startswith("D1~D2")
        )
        result = session.stepwise_evaluate(seed_id)
        assert result.ranked
        scores = [ns.score for ns in result.ranked]
        opac = [ns.opacity for ns in result.ranked]
        assert all(0.0 <= o <= 1.0 for o in opac)
        if len(set(scores)) > 1:
            lo, hi = min(scores), max(scores)
            for ns in result.ranked:
                assert ns.opacity == pytest.approx((ns.score - lo) / (hi - lo))
        # order preserving
        for a, b in zip(result.ranked, result.ranked[1:]):
            assert a.score >= b.score
            assert a.opacity >= b.opacity - 1e-12

    def test_degenerate_range_maps_to_one(self):
        docs = {
            "d1": [("x1", "A"), ("x2", "A"), ("y1", "B")],
            "d2": [("x1", "A"), ("x2", "A"), ("y1", "B")],
            "d3": [("x1", "A"), ("y2", "B")],
        }
        session = Session(dataset_from_docs(docs), min_support=1, jaccard_threshold=0.1)
        for seed_id in sorted(session.biclusters):
            result = session.stepwise_evaluate(seed_id)
            if len(result.ranked) == 1:
                assert result.ranked[0].opacity == 1.0

    def test_threshold_monotone_neighbor_sets(self):
        ds = three_domain_dataset()
        loose = Session(ds, min_support=1, jaccard_threshold=0.05)
        strict = Session(ds, min_support=1, jaccard_threshold=0.4)
        for seed_id in sorted(loose.biclusters):
            loose_ids = {b.id for b in loose.neighbors(seed_id)}
            strict_ids = {b.id for b in strict.neighbors(seed_id)}
            assert strict_ids <= loose_ids

    def test_same_relation_neighbors_included(self):
        docs = {
            "d1": [("x1", "A"), ("x2", "A"), ("y1", "B")],
            "d2": [("x1", "A"), ("x2", "A"), ("y1", "B"), ("y2", "B")],
            "d3": [("x1", "A"), ("x3", "A"), ("y2", "B")],
            "d4": [("x3", "A"), ("y2", "B")],
        }
        session = Session(dataset_from_docs(docs), min_support=1, jaccard_threshold=0.1)
        for seed_id in sorted(session.biclusters):
            seed = session.bicluster(seed_id)
            got = {b.id for b in session.neighbors(seed_id)}
            expected = set()
            for cand in session.biclusters.values():
                if cand.id == seed_id or cand.relation != seed.relation:
                    continue
                if (
                    jaccard(seed.left, cand.left) >= 0.1
                    or jaccard(seed.right, cand.right) >= 0.1
                ):
                    expected.add(cand.id)
            assert expected <= got
            same_rel_got = {
                b for b in got if session.bicluster(b).relation == seed.relation
            }
            assert same_rel_got == expected


class TestMarkKnown:
    def test_marked_pattern_scores_zero(self):
        session = Session(three_domain_dataset(), min_support=1)
        target = sorted(session.biclusters)[0]
        assert session.score_pattern(target) > 0
        session.mark_known([target])
        assert session.score_pattern(target) == 0.0

    def test_empty_mark_is_identity(self):
        session = Session(three_domain_dataset(), min_support=1)
        model = session.model
        session.mark_known([])
        assert session.model is model

    def test_double_mark_idempotent(self):
        session = Session(three_domain_dataset(), min_support=1)
        target = sorted(session.biclusters)[0]
        session.mark_known([target])
        tiles_after_one = list(session.known_tiles)
        model_after_one = session.model
        session.mark_known([target])
        assert session.known_tiles == tiles_after_one
        assert session.model is model_after_one

    def test_unknown_pattern_raises_before_mutation(self):
        session = Session(three_domain_dataset(), min_support=1)
        with pytest.raises(KeyError):
            session.mark_known(["nope"])
        assert session.known_tiles == []


class TestDocuments:
    def test_pair_containment(self, toy_dataset):
        session = Session(toy_dataset, min_support=2)
        bid = next(
            b.id
            for b in session.biclusters.values()
            if b.relation == "Person~Location"
        )
        docs = session.documents_for(bid)
        b = session.bicluster(bid)
        labels = session.dataset.entity_labels
        pair_labels = {
            (labels[e], labels[f]) for e in b.left for f in b.right
        }
        doc_rows = {d.doc_id: set(d.entities) for d in docs}
        for ents in doc_rows.values():
            assert any(le in ents and ri in ents for le, ri in pair_labels)

    def test_unknown_bicluster(self, toy_dataset):
        session = Session(toy_dataset, min_support=2)
        with pytest.raises(KeyError):
            session.documents_for("missing")


class TestSessionValidation:
    def test_bad_mode_rejected(self, toy_dataset):
        from tilechains.data import DataError

        with pytest.raises(DataError):
            Session(toy_dataset, mode="ternary")

    def test_domain_order_must_cover(self, toy_dataset):
        from tilechains.data import DataError

        with pytest.raises(DataError):
            Session(toy_dataset, domain_order=["Person", "Location"])

    def test_real_mode_session_runs(self):
        # varied counts keep the Gaussian family away from point-mass limits
        rng = np.random.default_rng(9)
        docs = {}
        counts = {}
        for d in range(8):
            doc_id = f"d{d}"
            ents = []
            for dom, pool in (("A", ["x1", "x2", "x3"]), ("B", ["y1", "y2", "y3"])):
                for ent in rng.choice(pool, size=2, replace=False):
                    ents.append((ent, dom))
                    counts[(doc_id, ent)] = int(rng.integers(1, 6))
            docs[doc_id] = ents
        session = Session(
            dataset_from_docs(docs, counts), mode="real", min_support=1
        )
        seed_id = sorted(session.biclusters)[0]
        result = session.stepwise_evaluate(seed_id)
        for ns in result.ranked:
            assert math.isfinite(ns.score)
            assert 0.0 <= ns.opacity <= 1.0
