"""Input-dependent weighted average: an MLP maps query features to simplex
weights over the scoring models, trained with a max-margin loss on the
combined scores against sampled negatives."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..errors import NonFiniteLoss
from ..manifests import dump_json, load_json, write_f32, read_f32, sha256_file, check_hash, ensure_dir
from ..scores import ScoreSet, check_aligned
from ..splits import NegativeSets
from .linear import softmax
from .mlp import Scaler, init_params, forward, backward, Adam, clone_params

SCHEMA_VERSION = "v1"

# Hyperparameter grid searched by default, in selection order.
DEFAULT_GRID = [
    {"layers": l, "width": w, "batch_size": b, "lr": lr, "n_neg": nn}
    for l in (1, 2) for w in (128, 256) for b in (64, 128, 256)
    for lr in (1e-1, 1e-2, 1e-4) for nn in (16, 32)
]


@dataclass
class WeightModel:
    model_names: List[str]
    params: Optional[list] = None
    scaler: Optional[Scaler] = None
    constant: bool = False
    margin: float = 1.0
    hyper: Dict = field(default_factory=dict)
    holdout_mrr: Optional[float] = None
    schema_version: str = SCHEMA_VERSION

    def predict_alpha(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.constant:
            return np.ones((x.shape[0], len(self.model_names)))
        z = self.scaler.transform(x)
        return softmax(forward(self.params, z)[-1])


def _score_matrices(score_sets: List[ScoreSet], indices: List[int]):
    """pos (n, k) and per-row (m_i, k) negative matrices for the queries."""
    pos = np.stack([s.pos[indices] for s in score_sets], axis=1)
    negs = []
    for q in indices:
        negs.append(np.stack([s.negs[q] for s in score_sets], axis=1)
                    if score_sets[0].negs[q].shape[0]
                    else np.zeros((0, len(score_sets))))
    return pos, negs


def _fit_weighter(features, pos, negs, k, config, margin, epochs, patience,
                  tol, seed):
    n, d = features.shape
    scaler = Scaler().fit(features)
    z = scaler.transform(features)
    sizes = [d] + [config["width"]] * config["layers"] + [k]
    params = init_params(sizes, np.random.default_rng([seed, 0]))
    rng = np.random.default_rng([seed, 1])
    opt = Adam(params, config["lr"])
    n_neg = config["n_neg"]
    batch_size = config["batch_size"]
    best_loss = np.inf
    best = clone_params(params)
    bad = 0
    for epoch in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            acts = forward(params, z[idx])
            alpha = softmax(acts[-1])
            dalpha = np.zeros_like(alpha)
            batch_loss = 0.0
            for row, qrow in enumerate(idx):
                cand = negs[qrow]
                m = cand.shape[0]
                if m == 0:
                    continue
                js = rng.integers(0, m, size=n_neg)
                negvec = cand[js]
                pos_c = float(alpha[row] @ pos[qrow])
                neg_c = negvec @ alpha[row]
                viol = margin - pos_c + neg_c
                active = viol > 0.0
                if active.any():
                    batch_loss += float(viol[active].sum()) / n_neg
                    dalpha[row] = (negvec[active].sum(axis=0)
                                   - active.sum() * pos[qrow]) / n_neg
            scale = 1.0 / idx.size
            batch_loss *= scale
            dalpha *= scale
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(epoch, batch_loss)
            dlogits = alpha * (dalpha - (dalpha * alpha).sum(axis=1, keepdims=True))
            opt.step(params, backward(params, acts, dlogits))
            total += batch_loss * idx.size
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(epoch, epoch_loss)
        if epoch_loss < best_loss - tol:
            best_loss = epoch_loss
            best = clone_params(params)
            bad = 0
        else:
            bad += 1
            if bad >= patience:
                break
    return best, scaler


def _holdout_mrr(model: WeightModel, features, pos, negs) -> float:
    alpha = model.predict_alpha(features)
    rr = []
    for row in range(features.shape[0]):
        cand = negs[row]
        if cand.shape[0] == 0:
            continue
        pos_c = float(alpha[row] @ pos[row])
        neg_c = cand @ alpha[row]
        rank = 1 + int(np.sum(neg_c > pos_c)) + int(np.sum(neg_c == pos_c))
        rr.append(1.0 / rank)
    return float(np.mean(rr)) if rr else 0.0


def train_weighter(features, score_sets: List[ScoreSet], negatives: NegativeSets,
                   margin: float = 1.0, hyper_grid: Optional[List[Dict]] = None,
                   seed: int = 0, partition: str = "valid",
                   holdout_frac: float = 0.2, epochs: int = 200,
                   patience: int = 10, tol: float = 1e-4) -> WeightModel:
    """Feature rows must align with the partition's queries in negative-set
    order. Hyperparameters are chosen by MRR on a held-out fraction of those
    queries, then the winner is refitted on all of them."""
    features = np.asarray(features, dtype=np.float64)
    indices = negatives.indices_for(partition)
    if features.shape[0] != len(indices):
        from ..errors import SchemaMismatch
        raise SchemaMismatch(
            f"{features.shape[0]} feature rows vs {len(indices)} queries in "
            f"partition {partition!r}")
    k = len(score_sets)
    names = [s.model_name for s in score_sets]
    if k == 1:
        return WeightModel(model_names=names, constant=True, margin=margin)
    check_aligned(score_sets)
    pos, negs = _score_matrices(score_sets, indices)
    grid = hyper_grid if hyper_grid is not None else DEFAULT_GRID
    n = features.shape[0]
    perm = np.random.default_rng([seed, 2]).permutation(n)
    n_held = max(1, int(round(holdout_frac * n))) if len(grid) > 1 else 0
    held, fit_rows = perm[:n_held], perm[n_held:]
    if fit_rows.size == 0:
        fit_rows = perm
    best_mrr = -np.inf
    best_config = None
    for config in grid:
        if len(grid) == 1:
            best_config = config
            break
        params, scaler = _fit_weighter(
            features[fit_rows], pos[fit_rows], [negs[i] for i in fit_rows], k,
            config, margin, epochs, patience, tol, seed)
        candidate = WeightModel(model_names=names, params=params, scaler=scaler,
                                margin=margin, hyper=dict(config))
        mrr = _holdout_mrr(candidate, features[held], pos[held],
                           [negs[i] for i in held])
        if mrr > best_mrr:
            best_mrr = mrr
            best_config = config
    params, scaler = _fit_weighter(features, pos, negs, k, best_config, margin,
                                   epochs, patience, tol, seed)
    return WeightModel(model_names=names, params=params, scaler=scaler,
                       margin=margin, hyper=dict(best_config),
                       holdout_mrr=None if best_mrr == -np.inf else float(best_mrr))


def save_weighter(out_dir, model: WeightModel):
    out_dir = ensure_dir(out_dir)
    manifest = {
        "kind": "weight-model",
        "model_names": model.model_names,
        "constant": model.constant,
        "margin": model.margin,
        "hyper": model.hyper,
        "holdout_mrr": model.holdout_mrr,
        "schema_version": model.schema_version,
        "files": {},
    }
    if not model.constant:
        sizes = [model.params[0][0].shape[0]] + [w.shape[1] for w, _ in model.params]
        manifest["sizes"] = sizes
        write_f32(out_dir / "scaler_mean.f32", model.scaler.mean)
        write_f32(out_dir / "scaler_std.f32", model.scaler.std)
        manifest["files"]["scaler_mean.f32"] = sha256_file(out_dir / "scaler_mean.f32")
        manifest["files"]["scaler_std.f32"] = sha256_file(out_dir / "scaler_std.f32")
        for i, (w, b) in enumerate(model.params):
            write_f32(out_dir / f"layer{i}_w.f32", w)
            write_f32(out_dir / f"layer{i}_b.f32", b)
            manifest["files"][f"layer{i}_w.f32"] = sha256_file(out_dir / f"layer{i}_w.f32")
            manifest["files"][f"layer{i}_b.f32"] = sha256_file(out_dir / f"layer{i}_b.f32")
    dump_json(manifest, out_dir / "manifest.json")
    return out_dir / "manifest.json"


def load_weighter(out_dir) -> WeightModel:
    out_dir = Path(out_dir)
    manifest = load_json(out_dir / "manifest.json")
    for name, digest in manifest["files"].items():
        check_hash(out_dir / name, digest)
    model = WeightModel(model_names=manifest["model_names"],
                        constant=manifest["constant"],
                        margin=manifest["margin"],
                        hyper=manifest["hyper"] or {},
                        holdout_mrr=manifest["holdout_mrr"],
                        schema_version=manifest["schema_version"])
    if model.constant:
        return model
    sizes = manifest["sizes"]
    mean = read_f32(out_dir / "scaler_mean.f32", (sizes[0],)).astype(np.float64)
    std = read_f32(out_dir / "scaler_std.f32", (sizes[0],)).astype(np.float64)
    model.scaler = Scaler(mean=mean, std=std)
    params = []
    for i in range(len(sizes) - 1):
        w = read_f32(out_dir / f"layer{i}_w.f32", (sizes[i], sizes[i + 1]))
        b = read_f32(out_dir / f"layer{i}_b.f32", (sizes[i + 1],))
        params.append([w.astype(np.float64), b.astype(np.float64)])
    model.params = params
    return model
