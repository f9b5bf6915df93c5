"""Combine aligned score sets into one, using global weights, a router's
one-hot choice, or a per-query learned weight vector. Within a query the
same weights apply to the positive and to every negative candidate."""

from typing import List, Optional

import numpy as np

from ..errors import SchemaMismatch
from ..scores import ScoreSet, check_aligned, combine
from .average import GlobalWeights
from .router import RouterModel, ALL_SAME
from .weighter import WeightModel

METHODS = ("global-average", "router", "weighted-average")


def router_alpha(router: RouterModel, features: np.ndarray,
                 model_names: List[str]) -> np.ndarray:
    """One-hot weights per row. The all-same class resolves to the router's
    designated fallback model."""
    classes = router.predict_classes(features)
    k = len(model_names)
    name_to_col = {name: i for i, name in enumerate(model_names)}
    alpha = np.zeros((features.shape[0], k))
    for row, cls in enumerate(classes):
        if cls == ALL_SAME:
            if router.allsame_model is None:
                raise SchemaMismatch(
                    "router predicted the all-same class but has no "
                    "allsame_model fallback configured")
            cls = router.allsame_model
        if cls not in name_to_col:
            raise SchemaMismatch(
                f"router class {cls!r} is not one of the score sets being "
                f"integrated: {model_names}")
        alpha[row, name_to_col[cls]] = 1.0
    return alpha


def integrate(method: str, integrator, score_sets: List[ScoreSet],
              features: Optional[np.ndarray] = None,
              indices: Optional[List[int]] = None) -> ScoreSet:
    """Build the combined ScoreSet.

    For router and weighted-average methods, `features` holds one row per
    query being integrated; pass `indices` when the rows cover a subset of
    the score sets' queries (weights for uncovered queries fall back to
    uniform, callers normally restrict downstream metrics to `indices`).
    """
    if method not in METHODS:
        raise ValueError(f"unknown integration method {method!r}")
    check_aligned(score_sets)
    names = [s.model_name for s in score_sets]
    k = len(score_sets)
    n_queries = score_sets[0].n_queries
    if method == "global-average":
        if not isinstance(integrator, GlobalWeights):
            raise SchemaMismatch("global-average integration needs GlobalWeights")
        return combine(score_sets, integrator.alpha)
    if features is None:
        raise SchemaMismatch(f"{method} integration requires per-query features")
    features = np.asarray(features, dtype=np.float64)
    rows = list(range(n_queries)) if indices is None else list(indices)
    if features.shape[0] != len(rows):
        raise SchemaMismatch(
            f"{features.shape[0]} feature rows for {len(rows)} queries")
    if method == "router":
        if not isinstance(integrator, RouterModel):
            raise SchemaMismatch("router integration needs a RouterModel")
        row_alpha = router_alpha(integrator, features, names)
    else:
        if not isinstance(integrator, WeightModel):
            raise SchemaMismatch("weighted-average integration needs a WeightModel")
        if integrator.model_names != names:
            raise SchemaMismatch(
                f"weight model was trained on {integrator.model_names}, "
                f"got score sets {names}")
        row_alpha = integrator.predict_alpha(features)
    alpha = np.full((n_queries, k), 1.0 / k)
    for row, q in enumerate(rows):
        alpha[q] = row_alpha[row]
    return combine(score_sets, alpha)
