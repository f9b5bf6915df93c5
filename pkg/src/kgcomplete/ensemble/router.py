"""Per-example model selection: a classifier over query features predicts
which scoring model to trust. Class targets come from per-model ranks; a
dedicated trailing class marks queries where every model ranked the
positive identically."""

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..errors import DegenerateLabels, UnsupportedRouterKind
from ..manifests import dump_json, load_json, write_f32, read_f32, sha256_file, check_hash, ensure_dir
from .gbdt import Gbdt
from .linear import LogisticRegression
from .mlp import MlpClassifier, Scaler

ROUTER_KINDS = ("logistic-regression", "decision-tree", "gbdt", "mlp")

ALL_SAME = "all-same"

SCHEMA_VERSION = "v1"

# Hyperparameter grids searched by default, in selection order.
DEFAULT_GRIDS = {
    "logistic-regression": [
        {"penalty": p, "strength": float(s)}
        for p in ("l1", "l2") for s in np.logspace(-5, 3, 9)
    ],
    "decision-tree": [
        {"max_depth": d, "lr": lr}
        for d in (2, 4, 8) for lr in (1e-1, 1e-2, 1e-3)
    ],
    "gbdt": [
        {"n_rounds": r, "max_depth": d, "lr": lr}
        for r in (100, 500, 1000) for d in (2, 4, 8) for lr in (1e-1, 1e-2, 1e-3)
    ],
    "mlp": [
        {"layers": l, "width": w, "batch_size": b, "lr": lr}
        for l in (1, 2) for w in (128, 256) for b in (64, 128, 256)
        for lr in (1e-1, 1e-2, 1e-3)
    ],
}


def label_router_targets(ranks) -> np.ndarray:
    """Per query: index of the best-ranked model (lowest index on ties), or
    the all-same class (= number of models) when every rank is equal."""
    ranks = np.asarray(ranks)
    labels = np.argmin(ranks, axis=1).astype(np.int64)
    all_same = (ranks == ranks[:, :1]).all(axis=1)
    labels[all_same] = ranks.shape[1]
    return labels


@dataclass
class RouterModel:
    kind: str
    classes: List[str]
    inner: Optional[object] = None
    constant_class: Optional[int] = None
    feature_names: Optional[List[str]] = None
    allsame_model: Optional[str] = None
    hyper: Dict = field(default_factory=dict)
    cv_accuracy: Optional[float] = None
    schema_version: str = SCHEMA_VERSION

    def predict_proba(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.constant_class is not None:
            out = np.zeros((x.shape[0], len(self.classes)))
            out[:, self.constant_class] = 1.0
            return out
        proba = self.inner.predict_proba(x)
        if proba.shape[1] != len(self.classes):
            padded = np.zeros((proba.shape[0], len(self.classes)))
            padded[:, :proba.shape[1]] = proba
            proba = padded
        return proba

    def predict_class_indices(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def predict_classes(self, x) -> List[str]:
        return [self.classes[i] for i in self.predict_class_indices(x)]


def _build(kind: str, config: Dict, seed: int):
    if kind == "logistic-regression":
        return LogisticRegression(penalty=config["penalty"], strength=config["strength"])
    if kind == "decision-tree":
        return Gbdt(n_rounds=1, max_depth=config["max_depth"], lr=config["lr"])
    if kind == "gbdt":
        return Gbdt(n_rounds=config["n_rounds"], max_depth=config["max_depth"],
                    lr=config["lr"])
    if kind == "mlp":
        return MlpClassifier(layers=config["layers"], width=config["width"],
                             batch_size=config["batch_size"], lr=config["lr"],
                             seed=seed)
    raise UnsupportedRouterKind(f"unknown router kind {kind!r}")


def cv_folds(n: int, n_folds: int, seed: int) -> List[np.ndarray]:
    perm = np.random.default_rng([seed, 0]).permutation(n)
    return [f for f in np.array_split(perm, n_folds) if f.size > 0]


def _cv_accuracy(features, labels, kind, config, n_classes, n_folds, seed) -> float:
    folds = cv_folds(features.shape[0], n_folds, seed)
    if len(folds) < 2:
        model = _build(kind, config, seed).fit(features, labels, n_classes=n_classes)
        return float(np.mean(model.predict(features) == labels))
    accs = []
    for i, held in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        model = _build(kind, config, seed).fit(features[train], labels[train],
                                               n_classes=n_classes)
        accs.append(float(np.mean(model.predict(features[held]) == labels[held])))
    return float(np.mean(accs))


def train_router(features, labels, kind: str, hyper_grid: Optional[List[Dict]] = None,
                 seed: int = 0, class_names: Optional[List[str]] = None,
                 feature_names: Optional[List[str]] = None,
                 n_folds: int = 5) -> RouterModel:
    """Grid search by seeded n-fold cross-validation accuracy, first best
    configuration kept, then a refit on all rows. A single distinct label
    short-circuits to a constant router with a warning."""
    if kind not in ROUTER_KINDS:
        raise UnsupportedRouterKind(f"unknown router kind {kind!r}")
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] == 0:
        raise DegenerateLabels("no rows to train on")
    if class_names is None:
        class_names = [f"class{i}" for i in range(int(labels.max()) + 1)]
    n_classes = len(class_names)
    distinct = np.unique(labels)
    if distinct.size < 2:
        warnings.warn("router labels contain a single class; returning a "
                      "constant router", RuntimeWarning)
        return RouterModel(kind=kind, classes=list(class_names),
                           constant_class=int(distinct[0]),
                           feature_names=list(feature_names) if feature_names else None)
    grid = hyper_grid if hyper_grid is not None else DEFAULT_GRIDS[kind]
    best_acc = -np.inf
    best_config = None
    for config in grid:
        acc = _cv_accuracy(features, labels, kind, config, n_classes, n_folds, seed)
        if acc > best_acc:
            best_acc = acc
            best_config = config
    inner = _build(kind, best_config, seed).fit(features, labels, n_classes=n_classes)
    return RouterModel(kind=kind, classes=list(class_names), inner=inner,
                       feature_names=list(feature_names) if feature_names else None,
                       hyper=dict(best_config), cv_accuracy=float(best_acc))


def feature_importance(router: RouterModel):
    """(feature_name, total split gain) pairs, sorted by gain descending.
    Features never split on report gain 0."""
    if router.kind not in ("gbdt", "decision-tree"):
        raise UnsupportedRouterKind(
            f"feature importance requires a tree router, got {router.kind!r}")
    if router.constant_class is not None:
        gains = np.zeros(len(router.feature_names or []))
    else:
        gains = router.inner.feature_gains()
    names = router.feature_names
    if names is None:
        names = [f"f{i}" for i in range(gains.shape[0])]
    order = np.argsort(-gains, kind="stable")
    return [(names[i], float(gains[i])) for i in order]


def save_router(out_dir, router: RouterModel):
    out_dir = ensure_dir(out_dir)
    manifest = {
        "kind": "router-model",
        "router_kind": router.kind,
        "classes": router.classes,
        "constant_class": router.constant_class,
        "feature_names": router.feature_names,
        "allsame_model": router.allsame_model,
        "hyper": router.hyper,
        "cv_accuracy": router.cv_accuracy,
        "schema_version": router.schema_version,
        "files": {},
    }
    if router.constant_class is None:
        inner = router.inner
        if router.kind in ("gbdt", "decision-tree"):
            manifest["structure"] = inner.to_dict()
        elif router.kind == "logistic-regression":
            write_f32(out_dir / "weights.f32", inner.weights)
            write_f32(out_dir / "bias.f32", inner.bias)
            manifest["structure"] = {
                "penalty": inner.penalty,
                "strength": inner.strength,
                "weights_shape": [int(s) for s in inner.weights.shape],
                "n_classes": inner.n_classes,
            }
            manifest["files"]["weights.f32"] = sha256_file(out_dir / "weights.f32")
            manifest["files"]["bias.f32"] = sha256_file(out_dir / "bias.f32")
        else:
            sizes = [router.inner.params[0][0].shape[0]]
            for w, _ in inner.params:
                sizes.append(w.shape[1])
            manifest["structure"] = {
                "sizes": sizes,
                "layers": inner.layers,
                "width": inner.width,
                "batch_size": inner.batch_size,
                "lr": inner.lr,
                "n_classes": inner.n_classes,
            }
            write_f32(out_dir / "scaler_mean.f32", inner.scaler.mean)
            write_f32(out_dir / "scaler_std.f32", inner.scaler.std)
            manifest["files"]["scaler_mean.f32"] = sha256_file(out_dir / "scaler_mean.f32")
            manifest["files"]["scaler_std.f32"] = sha256_file(out_dir / "scaler_std.f32")
            for i, (w, b) in enumerate(inner.params):
                write_f32(out_dir / f"layer{i}_w.f32", w)
                write_f32(out_dir / f"layer{i}_b.f32", b)
                manifest["files"][f"layer{i}_w.f32"] = sha256_file(out_dir / f"layer{i}_w.f32")
                manifest["files"][f"layer{i}_b.f32"] = sha256_file(out_dir / f"layer{i}_b.f32")
    dump_json(manifest, out_dir / "manifest.json")
    return out_dir / "manifest.json"


def load_router(out_dir) -> RouterModel:
    out_dir = Path(out_dir)
    manifest = load_json(out_dir / "manifest.json")
    for name, digest in manifest["files"].items():
        check_hash(out_dir / name, digest)
    kind = manifest["router_kind"]
    router = RouterModel(kind=kind, classes=manifest["classes"],
                         constant_class=manifest["constant_class"],
                         feature_names=manifest["feature_names"],
                         allsame_model=manifest["allsame_model"],
                         hyper=manifest["hyper"] or {},
                         cv_accuracy=manifest["cv_accuracy"],
                         schema_version=manifest["schema_version"])
    if router.constant_class is not None:
        return router
    structure = manifest["structure"]
    if kind in ("gbdt", "decision-tree"):
        router.inner = Gbdt.from_dict(structure)
    elif kind == "logistic-regression":
        inner = LogisticRegression(penalty=structure["penalty"],
                                   strength=structure["strength"])
        shape = tuple(structure["weights_shape"])
        inner.weights = read_f32(out_dir / "weights.f32", shape).astype(np.float64)
        inner.bias = read_f32(out_dir / "bias.f32", (shape[1],)).astype(np.float64)
        inner.n_classes = int(structure["n_classes"])
        router.inner = inner
    else:
        sizes = structure["sizes"]
        inner = MlpClassifier(layers=int(structure["layers"]),
                              width=int(structure["width"]),
                              batch_size=int(structure["batch_size"]),
                              lr=float(structure["lr"]))
        inner.n_classes = int(structure["n_classes"])
        mean = read_f32(out_dir / "scaler_mean.f32", (sizes[0],)).astype(np.float64)
        std = read_f32(out_dir / "scaler_std.f32", (sizes[0],)).astype(np.float64)
        inner.scaler = Scaler(mean=mean, std=std)
        params = []
        for i in range(len(sizes) - 1):
            w = read_f32(out_dir / f"layer{i}_w.f32", (sizes[i], sizes[i + 1]))
            b = read_f32(out_dir / f"layer{i}_b.f32", (sizes[i + 1],))
            params.append([w.astype(np.float64), b.astype(np.float64)])
        inner.params = params
        router.inner = inner
    return router
