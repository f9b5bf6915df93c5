"""Ranking metrics over fixed negative sets, with breakdowns.

Ties are counted pessimistically: a negative scoring equal to the positive
pushes the positive's rank down, so a constant scorer over m negatives earns
rank m+1 on every query.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .errors import MisalignedScoreSets
from .scores import ScoreSet, check_aligned
from .splits import NegativeSets


@dataclass
class Metrics:
    mrr: float
    hits3: float
    hits10: float
    n_queries: int
    n_skipped: int = 0

    def as_dict(self):
        return asdict(self)


def rank_of_positive(pos_score, neg_scores) -> int:
    neg = np.asarray(neg_scores, dtype=np.float64)
    return int(1 + np.sum(neg > pos_score) + np.sum(neg == pos_score))


def _query_indices(negatives: NegativeSets, partition=None, indices=None):
    if indices is not None:
        return list(indices)
    return negatives.indices_for(partition)


def ranks_for(score_set: ScoreSet, negatives: NegativeSets, partition=None, indices=None):
    """(query_index, rank) pairs for all non-empty-pool queries in scope."""
    if score_set.n_queries != negatives.n_queries:
        raise MisalignedScoreSets(
            f"{score_set.model_name}: {score_set.n_queries} queries vs "
            f"{negatives.n_queries} in negative sets")
    out = []
    for q in _query_indices(negatives, partition, indices):
        if negatives.negatives[q].shape[0] == 0:
            continue
        out.append((q, rank_of_positive(score_set.pos[q], score_set.negs[q])))
    return out


def metrics_from_ranks(ranks, n_skipped=0) -> Metrics:
    r = np.asarray(ranks, dtype=np.float64)
    if r.size == 0:
        return Metrics(mrr=0.0, hits3=0.0, hits10=0.0, n_queries=0, n_skipped=n_skipped)
    return Metrics(
        mrr=float(np.mean(1.0 / r)),
        hits3=float(np.mean(r <= 3)),
        hits10=float(np.mean(r <= 10)),
        n_queries=int(r.size),
        n_skipped=n_skipped,
    )


def compute_metrics(score_set: ScoreSet, negatives: NegativeSets,
                    partition=None, indices=None) -> Metrics:
    scope = _query_indices(negatives, partition, indices)
    pairs = ranks_for(score_set, negatives, indices=scope)
    return metrics_from_ranks([r for _, r in pairs], n_skipped=len(scope) - len(pairs))


def per_relation_breakdown(score_set: ScoreSet, negatives: NegativeSets,
                           kg=None, partition=None):
    """Metrics per relation of the positive triple; empty cells omitted."""
    pairs = ranks_for(score_set, negatives, partition=partition)
    buckets = {}
    for q, rank in pairs:
        rel = negatives.queries[q].triple.rel
        key = kg.relations[rel] if kg is not None else rel
        buckets.setdefault(key, []).append(rank)
    return {k: metrics_from_ranks(v) for k, v in buckets.items()}


def description_breakdown(score_set: ScoreSet, negatives: NegativeSets, kg,
                          partition=None):
    """Metrics bucketed by how many of the positive's entities carry a
    non-empty description: none, one, or both."""
    names = {0: "none", 1: "one", 2: "both"}
    pairs = ranks_for(score_set, negatives, partition=partition)
    buckets = {}
    for q, rank in pairs:
        t = negatives.queries[q].triple
        n = sum(1 for e in (t.head, t.tail) if kg.entities[e].description)
        buckets.setdefault(names[n], []).append(rank)
    return {k: metrics_from_ranks(v) for k, v in buckets.items()}


def compare_models(score_set_a: ScoreSet, score_set_b: ScoreSet,
                   negatives: NegativeSets, partition=None):
    """Per-query rank comparison: fractions of queries where a wins, b wins,
    or both tie; the three sum to 1."""
    check_aligned([score_set_a, score_set_b])
    ranks_a = dict(ranks_for(score_set_a, negatives, partition=partition))
    ranks_b = dict(ranks_for(score_set_b, negatives, partition=partition))
    common = sorted(set(ranks_a) & set(ranks_b))
    if not common:
        return 0.0, 0.0, 0.0
    a_better = sum(1 for q in common if ranks_a[q] < ranks_b[q])
    b_better = sum(1 for q in common if ranks_b[q] < ranks_a[q])
    n = len(common)
    tie = n - a_better - b_better
    return a_better / n, b_better / n, tie / n


def format_metrics_table(rows, title=""):
    """Aligned-column text report: rows of (label, Metrics)."""
    lines = []
    if title:
        lines.append(title)
    header = f"{'model':<32} {'MRR':>8} {'H@3':>8} {'H@10':>8} {'queries':>8} {'skipped':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for label, m in rows:
        lines.append(f"{label:<32} {m.mrr:>8.4f} {m.hits3:>8.4f} {m.hits10:>8.4f} "
                     f"{m.n_queries:>8d} {m.n_skipped:>8d}")
    return "\n".join(lines)
