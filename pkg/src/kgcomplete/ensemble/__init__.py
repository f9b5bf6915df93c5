"""Integration strategies over aligned score sets: global weighted average,
per-example routing, and input-dependent weighted averaging, with the
classifier implementations they rely on."""

from .average import GlobalWeights, fit_global_average, simplex_grid
from .gbdt import Gbdt, Tree
from .integrate import METHODS, integrate, router_alpha
from .linear import LogisticRegression
from .mlp import MlpClassifier, Scaler
from .router import (ALL_SAME, DEFAULT_GRIDS, ROUTER_KINDS, RouterModel,
                     feature_importance, label_router_targets, load_router,
                     save_router, train_router)
from .weighter import (DEFAULT_GRID as WEIGHTER_DEFAULT_GRID, WeightModel,
                       load_weighter, save_weighter, train_weighter)

__all__ = [
    "GlobalWeights", "fit_global_average", "simplex_grid",
    "Gbdt", "Tree", "LogisticRegression", "MlpClassifier", "Scaler",
    "METHODS", "integrate", "router_alpha",
    "ALL_SAME", "DEFAULT_GRIDS", "ROUTER_KINDS", "RouterModel",
    "feature_importance", "label_router_targets", "load_router",
    "save_router", "train_router",
    "WEIGHTER_DEFAULT_GRID", "WeightModel", "load_weighter", "save_weighter",
    "train_weighter",
]
