"""Global weighted average: one simplex weight vector for all queries,
found by exhaustive grid search on validation MRR."""

from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from ..scores import ScoreSet, check_aligned, combine
from ..splits import NegativeSets


@dataclass
class GlobalWeights:
    alpha: np.ndarray
    model_names: List[str]
    valid_mrr: float


def simplex_grid(k: int, step: float = 0.05) -> Iterator[np.ndarray]:
    """All k-vectors with entries in {step, 2*step, ...} summing to 1,
    yielded in lexicographic order. Entries are never 0 or 1."""
    units = round(1.0 / step)

    def rec(remaining_slots, remaining_units, prefix):
        if remaining_slots == 1:
            if 1 <= remaining_units <= units - 1:
                yield prefix + [remaining_units]
            return
        lo = max(1, remaining_units - (remaining_slots - 1) * (units - 1))
        hi = min(units - 1, remaining_units - (remaining_slots - 1))
        for a in range(lo, hi + 1):
            yield from rec(remaining_slots - 1, remaining_units - a, prefix + [a])

    for parts in rec(k, units, []):
        yield np.array(parts, dtype=np.float64) * step


def fit_global_average(score_sets: List[ScoreSet], negatives: NegativeSets,
                       partition: Optional[str] = "valid",
                       step: float = 0.05) -> GlobalWeights:
    """Search the simplex grid for the weights maximizing MRR over the given
    partition's queries. Ties keep the lexicographically smallest alpha
    (candidates are visited in lexicographic order and only strict
    improvements replace the incumbent)."""
    from ..evaluate import compute_metrics

    if len(score_sets) < 2:
        raise ValueError("need at least two score sets to average")
    check_aligned(score_sets)
    best_alpha = None
    best_mrr = -np.inf
    for alpha in simplex_grid(len(score_sets), step):
        combined = combine(score_sets, alpha)
        mrr = compute_metrics(combined, negatives, partition=partition).mrr
        if mrr > best_mrr:
            best_mrr = mrr
            best_alpha = alpha
    return GlobalWeights(alpha=best_alpha,
                         model_names=[s.model_name for s in score_sets],
                         valid_mrr=float(best_mrr))
