from fractions import Fraction

import numpy as np
import pytest

from kgcomplete.errors import MisalignedScoreSets
from kgcomplete.evaluate import (Metrics, compare_models, compute_metrics,
                                 description_breakdown, format_metrics_table,
                                 metrics_from_ranks, per_relation_breakdown,
                                 rank_of_positive, ranks_for)
from kgcomplete.graph import EntityRecord, KnowledgeGraph, Triple
from kgcomplete.scores import ScoreSet
from kgcomplete.splits import NegativeSets, Query


def brute_force_rank(pos, negs):
    """Sort-based oracle: sort descending with the positive losing ties, then
    find its position."""
    tagged = sorted([(s, 0) for s in negs] + [(pos, 1)],
                    key=lambda x: (-x[0], x[1]))
    return 1 + [i for i, (_, is_pos) in enumerate(tagged) if is_pos][0]


def make_negatives(pools, partitions=None, sides=None):
    """NegativeSets stub: pools[i] is the number of negatives for query i."""
    queries = []
    negatives = []
    for i, m in enumerate(pools):
        part = partitions[i] if partitions else "test"
        side = sides[i] if sides else "head"
        queries.append(Query(i, part, side, Triple(0, 0, 1)))
        negatives.append(np.arange(m, dtype=np.int64))
    return NegativeSets(queries=queries, negatives=negatives,
                        m_eval=max(pools or [0]), seed=0)


def score_set(name, pos, negs):
    return ScoreSet(model_name=name, pos=np.asarray(pos, dtype=np.float64),
                    negs=[np.asarray(n, dtype=np.float64) for n in negs])


class TestRankOracle:

    def test_matches_brute_force_on_seeded_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            m = int(rng.integers(1, 11))
            # coarse grid forces frequent exact ties
            scores = rng.choice(np.linspace(-1, 1, 7), size=m + 1)
            pos, negs = float(scores[0]), scores[1:].tolist()
            assert rank_of_positive(pos, negs) == brute_force_rank(pos, negs)

    def test_pessimistic_tie_handling(self):
        assert rank_of_positive(1.0, [1.0, 1.0, 0.0]) == 3
        assert rank_of_positive(1.0, [2.0]) == 2
        assert rank_of_positive(1.0, [0.0, 0.5]) == 1

    def test_constant_scorer_ranks_last(self):
        assert rank_of_positive(0.0, [0.0] * 7) == 8

    def test_metrics_match_rational_oracle(self):
        rng = np.random.default_rng(1)
        ranks = [int(rng.integers(1, 12)) for _ in range(500)]
        m = metrics_from_ranks(ranks)
        frac_mrr = sum(Fraction(1, r) for r in ranks) / len(ranks)
        assert abs(m.mrr - float(frac_mrr)) < 1e-12
        assert m.hits3 == sum(r <= 3 for r in ranks) / len(ranks)
        assert m.hits10 == sum(r <= 10 for r in ranks) / len(ranks)
        assert m.n_queries == len(ranks)


class TestComputeMetrics:

    def test_hand_example(self):
        neg = make_negatives([2, 2], partitions=["test", "test"])
        ss = score_set("m", pos=[3.0, 1.0],
                       negs=[[1.0, 2.0], [1.0, 2.0]])
        m = compute_metrics(ss, neg, partition="test")
        # ranks: 1 and 3 -> MRR = (1 + 1/3)/2 = 2/3
        assert m.mrr == pytest.approx(2 / 3)
        assert m.hits3 == 1.0
        assert m.n_queries == 2 and m.n_skipped == 0

    def test_empty_pool_excluded_and_counted(self):
        neg = make_negatives([2, 0, 2])
        ss = score_set("m", pos=[1.0, 1.0, 1.0],
                       negs=[[0.0, 0.0], [], [2.0, 2.0]])
        m = compute_metrics(ss, neg)
        assert m.n_queries == 2
        assert m.n_skipped == 1
        assert m.mrr == pytest.approx((1.0 + 1 / 3) / 2)

    def test_partition_scoping(self):
        neg = make_negatives([1, 1], partitions=["valid", "test"])
        ss = score_set("m", pos=[1.0, 0.0], negs=[[0.0], [1.0]])
        assert compute_metrics(ss, neg, partition="valid").mrr == 1.0
        assert compute_metrics(ss, neg, partition="test").mrr == 0.5
        assert compute_metrics(ss, neg).n_queries == 2

    def test_misaligned_rejected(self):
        neg = make_negatives([1, 1])
        ss = score_set("m", pos=[1.0], negs=[[0.0]])
        with pytest.raises(MisalignedScoreSets):
            ranks_for(ss, neg)

    def test_all_empty_gives_zero_metrics(self):
        neg = make_negatives([0])
        ss = score_set("m", pos=[1.0], negs=[[]])
        m = compute_metrics(ss, neg)
        assert m.mrr == 0.0 and m.n_queries == 0 and m.n_skipped == 1


def breakdown_kg():
    ents = [
        EntityRecord(0, "K0", "drug", "a", "has desc"),
        EntityRecord(1, "K1", "disease", "b", None),
        EntityRecord(2, "K2", "disease", "c", "has desc"),
    ]
    triples = np.array([[0, 0, 1], [0, 1, 2]], dtype=np.int64)
    return KnowledgeGraph(ents, ["treats", "causes"], triples)


class TestBreakdowns:

    def test_per_relation(self):
        kg = breakdown_kg()
        queries = [Query(0, "test", "head", Triple(0, 0, 1)),
                   Query(1, "test", "tail", Triple(0, 1, 2))]
        neg = NegativeSets(queries=queries,
                           negatives=[np.array([9]), np.array([9])],
                           m_eval=1, seed=0)
        ss = score_set("m", pos=[1.0, 0.0], negs=[[0.0], [1.0]])
        got = per_relation_breakdown(ss, neg, kg=kg)
        assert set(got) == {"treats", "causes"}
        assert got["treats"].mrr == 1.0
        assert got["causes"].mrr == 0.5

    def test_description_buckets(self):
        kg = breakdown_kg()
        # (0,1): one side described; (0,2): both described
        queries = [Query(0, "test", "head", Triple(0, 0, 1)),
                   Query(1, "test", "tail", Triple(0, 1, 2))]
        neg = NegativeSets(queries=queries,
                           negatives=[np.array([9]), np.array([9])],
                           m_eval=1, seed=0)
        ss = score_set("m", pos=[1.0, 1.0], negs=[[0.0], [0.0]])
        got = description_breakdown(ss, neg, kg)
        assert set(got) == {"one", "both"}
        assert got["one"].n_queries == 1
        assert got["both"].n_queries == 1


class TestCompare:

    def test_fractions_sum_to_one(self):
        neg = make_negatives([3, 3, 3, 3])
        a = score_set("a", pos=[3, 0, 1, 1], negs=[[1, 2, 0]] * 4)
        b = score_set("b", pos=[0, 3, 1, 1], negs=[[1, 2, 0]] * 4)
        fa, fb, tie = compare_models(a, b, neg)
        assert fa == pytest.approx(0.25)
        assert fb == pytest.approx(0.25)
        assert tie == pytest.approx(0.5)
        assert fa + fb + tie == pytest.approx(1.0)

    def test_identical_sets_tie_everywhere(self):
        neg = make_negatives([2, 2])
        a = score_set("a", pos=[1, 1], negs=[[0, 2], [0, 2]])
        fa, fb, tie = compare_models(a, a, neg)
        assert tie == 1.0 and fa == 0.0 and fb == 0.0


def test_format_table_alignment():
    rows = [("modelname", Metrics(0.5, 0.25, 0.75, 100, 2))]
    text = format_metrics_table(rows, title="t")
    lines = text.splitlines()
    assert lines[0] == "t"
    assert "MRR" in lines[1] and "skipped" in lines[1]
    assert "0.5000" in lines[3] and "100" in lines[3]
