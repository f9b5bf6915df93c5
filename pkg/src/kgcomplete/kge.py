"""Embedding tables for four scoring families, trained with a max-margin
ranking loss, type-matched corruption sampling, cubic-norm regularization,
and adaptive-moment updates.

Scoring conventions (higher is better):
  TransE    -||h + r - t||_2
  DistMult  sum_i h_i r_i t_i
  ComplEx   Re(sum_i h_i r_i conj(t_i)), tables store real halves then
            imaginary halves side by side
  RotatE    -||h o e^{i theta_r} - t||_2, relations stored as phase angles
"""

import warnings
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import kernels
from .errors import NoCandidates, NonFiniteLoss
from .graph import KnowledgeGraph, Triple
from .manifests import dump_json, load_json, write_f32, read_f32, sha256_file, ensure_dir
from .scores import ScoreSet
from .splits import NegativeSets

MODEL_KINDS = ("TransE", "DistMult", "ComplEx", "RotatE")

_KIND_ALIASES = {k.lower(): k for k in MODEL_KINDS}

# Hyperparameter values searched over at full scale.
PAPER_GRID = {
    "dim": [500, 1000, 2000],
    "margin": [0.1, 1.0],
    "lr": [1e-3, 1e-4],
    "negatives": [128, 256],
    "l3_coeff": [1e-5, 1e-6],
}


def canonical_kind(name: str) -> str:
    key = name.lower()
    if key not in _KIND_ALIASES:
        raise ValueError(f"unknown model kind {name!r}; expected one of {MODEL_KINDS}")
    return _KIND_ALIASES[key]


def table_widths(kind: str, dim: int):
    """(entity width, relation width) for a model kind."""
    kind = canonical_kind(kind)
    if kind in ("TransE", "DistMult"):
        return dim, dim
    if kind == "ComplEx":
        return 2 * dim, 2 * dim
    return 2 * dim, dim


@dataclass
class KgeConfig:
    model_kind: str
    dim: int
    margin: float = 1.0
    lr: float = 1e-3
    negatives: int = 128
    l3_coeff: float = 1e-5
    batch_size: int = 512
    max_steps: int = 10000
    eval_every: int = 500
    seed: int = 0

    def __post_init__(self):
        self.model_kind = canonical_kind(self.model_kind)
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.negatives <= 0:
            raise ValueError("negatives must be positive")
        if self.l3_coeff < 0:
            raise ValueError("l3_coeff must be non-negative")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.eval_every <= 0:
            raise ValueError("eval_every must be positive")


@dataclass
class KgeModel:
    config: KgeConfig
    entity_emb: np.ndarray
    relation_emb: np.ndarray
    entity_keys: Optional[List[str]] = None
    relations: Optional[List[str]] = None
    best_valid_mrr: Optional[float] = None
    step: int = 0


def init_model(config: KgeConfig, n_entities: int, n_relations: int,
               entity_keys=None, relations=None) -> KgeModel:
    """Uniform(-0.5/dim, 0.5/dim) entries; RotatE phases uniform(0, 2pi)."""
    rng = np.random.default_rng([config.seed, 0])
    ew, rw = table_widths(config.model_kind, config.dim)
    bound = 0.5 / config.dim
    ent = rng.uniform(-bound, bound, size=(n_entities, ew))
    if config.model_kind == "RotatE":
        rel = rng.uniform(0.0, 2.0 * np.pi, size=(n_relations, rw))
    else:
        rel = rng.uniform(-bound, bound, size=(n_relations, rw))
    return KgeModel(config=config, entity_emb=ent, relation_emb=rel,
                    entity_keys=list(entity_keys) if entity_keys is not None else None,
                    relations=list(relations) if relations is not None else None)


_SCORE_FNS = {
    "TransE": "transe_scores",
    "DistMult": "distmult_scores",
    "ComplEx": "complex_scores",
    "RotatE": "rotate_scores",
}

_GRAD_FNS = {
    "TransE": "transe_grads",
    "DistMult": "distmult_grads",
    "ComplEx": "complex_grads",
    "RotatE": "rotate_grads",
}


def _score_fn(kind):
    return getattr(kernels, _SCORE_FNS[canonical_kind(kind)])


def _grad_fn(kind):
    return getattr(kernels, _GRAD_FNS[canonical_kind(kind)])


def score_batch(model: KgeModel, h, r, t) -> np.ndarray:
    h = np.ascontiguousarray(h, dtype=np.int64)
    r = np.ascontiguousarray(r, dtype=np.int64)
    t = np.ascontiguousarray(t, dtype=np.int64)
    return _score_fn(model.config.model_kind)(model.entity_emb, model.relation_emb, h, r, t)


def score_triple(model: KgeModel, triple: Triple) -> float:
    out = score_batch(model, [triple.head], [triple.rel], [triple.tail])
    return float(out[0])


def rank_loss(pos_score: float, neg_scores, margin: float) -> float:
    neg = np.asarray(neg_scores, dtype=np.float64)
    if neg.size == 0:
        raise ValueError("neg_scores must be non-empty")
    return float(np.mean(np.maximum(0.0, margin - pos_score + neg)))


def _draw_replacements(kg: KnowledgeGraph, t: Triple, sides, rng) -> np.ndarray:
    """One same-type replacement entity per requested side (0=head, 1=tail),
    never equal to the original; collisions with known positives are
    redrawn up to 10 times, then kept."""
    out = np.empty(len(sides), dtype=np.int64)
    for i, side in enumerate(sides):
        orig = t.head if side == 0 else t.tail
        pool = kg.type_to_entities[kg.entity_types[orig]]
        if pool.shape[0] <= 1:
            raise NoCandidates(
                f"entity type {kg.entity_types[orig]!r} has a single member; "
                f"cannot corrupt")
        e = int(pool[rng.integers(pool.shape[0])])
        while e == orig:
            e = int(pool[rng.integers(pool.shape[0])])
        candidate = (e, t.rel, t.tail) if side == 0 else (t.head, t.rel, e)
        retries = 0
        while candidate in kg.triple_set and retries < 10:
            e = int(pool[rng.integers(pool.shape[0])])
            while e == orig:
                e = int(pool[rng.integers(pool.shape[0])])
            candidate = (e, t.rel, t.tail) if side == 0 else (t.head, t.rel, e)
            retries += 1
        if retries >= 10 and candidate in kg.triple_set:
            warnings.warn("kept a corruption that collides with a known positive "
                          "after 10 resamples", RuntimeWarning)
        out[i] = e
    return out


def sample_corruptions(kg_train: KnowledgeGraph, t: Triple, n: int, rng) -> List[Triple]:
    """n corruptions of t, each replacing the head or the tail (chosen
    uniformly per negative) with a uniform same-type entity."""
    sides = rng.integers(0, 2, size=n)
    ents = _draw_replacements(kg_train, t, sides, rng)
    out = []
    for side, e in zip(sides, ents):
        if side == 0:
            out.append(Triple(int(e), t.rel, t.tail))
        else:
            out.append(Triple(t.head, t.rel, int(e)))
    return out


def batch_loss_and_grads(kind: str, ent: np.ndarray, rel: np.ndarray,
                         pos: np.ndarray, neg: np.ndarray,
                         margin: float, l3_coeff: float):
    """Mean hinge loss over a batch plus cubic-norm regularization of the
    touched rows; returns (loss, d/d ent, d/d rel) as dense tables.

    pos is (B, 3); neg is (B, N, 3), negatives grouped per positive.
    """
    score = _score_fn(kind)
    grad = _grad_fn(kind)
    b, n = neg.shape[0], neg.shape[1]
    flat = neg.reshape(-1, 3)
    hp = np.ascontiguousarray(pos[:, 0])
    rp = np.ascontiguousarray(pos[:, 1])
    tp = np.ascontiguousarray(pos[:, 2])
    hn = np.ascontiguousarray(flat[:, 0])
    rn = np.ascontiguousarray(flat[:, 1])
    tn = np.ascontiguousarray(flat[:, 2])
    pos_scores = score(ent, rel, hp, rp, tp)
    neg_scores = score(ent, rel, hn, rn, tn).reshape(b, n)
    viol = margin - pos_scores[:, None] + neg_scores
    active = viol > 0.0
    scale = 1.0 / (b * n)
    loss = float(np.sum(viol[active])) * scale
    coeff_pos = -active.sum(axis=1).astype(np.float64) * scale
    coeff_neg = (active.astype(np.float64) * scale).reshape(-1)
    gent = np.zeros_like(ent)
    grel = np.zeros_like(rel)
    grad(ent, rel, hp, rp, tp, coeff_pos, gent, grel)
    grad(ent, rel, hn, rn, tn, coeff_neg, gent, grel)
    if l3_coeff > 0.0:
        erows = np.unique(np.concatenate([hp, tp, hn, tn]))
        rrows = np.unique(np.concatenate([rp, rn]))
        loss += l3_coeff * (kernels.l3_penalty(ent, erows) +
                            kernels.l3_penalty(rel, rrows))
        kernels.l3_add_grad(ent, erows, l3_coeff, gent)
        kernels.l3_add_grad(rel, rrows, l3_coeff, grel)
    return loss, gent, grel


def score_queries(model: KgeModel, negatives: NegativeSets,
                  model_name: Optional[str] = None) -> ScoreSet:
    """Score every query's positive and its fixed negative candidates."""
    qs = negatives.queries
    hs, rs, ts = [], [], []
    for q in qs:
        hs.append(q.triple.head)
        rs.append(q.triple.rel)
        ts.append(q.triple.tail)
    pos = score_batch(model, hs, rs, ts)
    hn, rn, tn, counts = [], [], [], []
    for q in qs:
        cand = negatives.negatives[q.index]
        counts.append(cand.shape[0])
        for e in cand:
            if q.side == "head":
                hn.append(int(e))
                tn.append(q.triple.tail)
            else:
                hn.append(q.triple.head)
                tn.append(int(e))
            rn.append(q.triple.rel)
    flat = (score_batch(model, hn, rn, tn) if hn
            else np.zeros(0, dtype=np.float64))
    negs = []
    off = 0
    for c in counts:
        negs.append(flat[off:off + c].copy())
        off += c
    name = model_name if model_name is not None else model.config.model_kind.lower()
    return ScoreSet(model_name=name, pos=pos, negs=negs,
                    sides=[q.side for q in qs])


def validation_mrr(model: KgeModel, negatives: NegativeSets) -> float:
    from .evaluate import compute_metrics
    scored = score_queries(model, negatives)
    return compute_metrics(scored, negatives, partition="valid").mrr


def train_kge(kg_train: KnowledgeGraph, valid_negatives: Optional[NegativeSets],
              config: KgeConfig, progress=None) -> KgeModel:
    """Mini-batch training over epoch-shuffled triples. Every eval_every
    steps the model is scored on the fixed validation negatives and the
    checkpoint with the best validation MRR (earliest on ties) is returned.
    Without validation sets the final parameters are returned."""
    model = init_model(config, kg_train.num_entities, kg_train.num_relations,
                       entity_keys=[e.key for e in kg_train.entities],
                       relations=list(kg_train.relations))
    if config.max_steps == 0:
        return model
    rng = np.random.default_rng([config.seed, 1])
    ent, rel = model.entity_emb, model.relation_emb
    m_ent = np.zeros_like(ent)
    v_ent = np.zeros_like(ent)
    m_rel = np.zeros_like(rel)
    v_rel = np.zeros_like(rel)
    triples = kg_train.triples
    n_triples = triples.shape[0]
    best_mrr = -np.inf
    best = None
    step = 0
    order = np.zeros(0, dtype=np.int64)
    cursor = 0
    while step < config.max_steps:
        if cursor >= order.shape[0]:
            order = rng.permutation(n_triples)
            cursor = 0
        batch_idx = order[cursor:cursor + config.batch_size]
        cursor += config.batch_size
        pos = triples[batch_idx]
        n = config.negatives
        neg = np.empty((pos.shape[0], n, 3), dtype=np.int64)
        for i, row in enumerate(pos):
            t = Triple(int(row[0]), int(row[1]), int(row[2]))
            sides = rng.integers(0, 2, size=n)
            ents = _draw_replacements(kg_train, t, sides, rng)
            neg[i, :, 0] = np.where(sides == 0, ents, t.head)
            neg[i, :, 1] = t.rel
            neg[i, :, 2] = np.where(sides == 1, ents, t.tail)
        loss, gent, grel = batch_loss_and_grads(
            config.model_kind, ent, rel, pos, neg, config.margin, config.l3_coeff)
        step += 1
        if not np.isfinite(loss):
            raise NonFiniteLoss(step, loss)
        kernels.adam_update(ent, gent, m_ent, v_ent, config.lr, 0.9, 0.999, 1e-8, step)
        kernels.adam_update(rel, grel, m_rel, v_rel, config.lr, 0.9, 0.999, 1e-8, step)
        at_eval = valid_negatives is not None and (
            step % config.eval_every == 0 or step == config.max_steps)
        if at_eval:
            mrr = validation_mrr(model, valid_negatives)
            if mrr > best_mrr:
                best_mrr = mrr
                best = (ent.copy(), rel.copy(), step)
        if progress is not None:
            progress(step, loss)
    if best is not None:
        return KgeModel(config=config, entity_emb=best[0], relation_emb=best[1],
                        entity_keys=model.entity_keys, relations=model.relations,
                        best_valid_mrr=float(best_mrr), step=best[2])
    model.step = step
    return model


def save_kge(out_dir, model: KgeModel):
    out_dir = ensure_dir(out_dir)
    ent_path = out_dir / "entity_emb.f32"
    rel_path = out_dir / "relation_emb.f32"
    write_f32(ent_path, model.entity_emb)
    write_f32(rel_path, model.relation_emb)
    manifest = {
        "kind": "kge-model",
        "config": asdict(model.config),
        "entity_keys": model.entity_keys,
        "relations": model.relations,
        "best_valid_mrr": model.best_valid_mrr,
        "step": model.step,
        "entity_shape": [int(x) for x in model.entity_emb.shape],
        "relation_shape": [int(x) for x in model.relation_emb.shape],
        "files": {
            "entity_emb.f32": sha256_file(ent_path),
            "relation_emb.f32": sha256_file(rel_path),
        },
    }
    dump_json(manifest, out_dir / "manifest.json")
    return out_dir / "manifest.json"


def load_kge(out_dir) -> KgeModel:
    out_dir = Path(out_dir)
    manifest = load_json(out_dir / "manifest.json")
    config = KgeConfig(**manifest["config"])
    from .manifests import check_hash
    check_hash(out_dir / "entity_emb.f32", manifest["files"]["entity_emb.f32"])
    check_hash(out_dir / "relation_emb.f32", manifest["files"]["relation_emb.f32"])
    ent = read_f32(out_dir / "entity_emb.f32", tuple(manifest["entity_shape"]))
    rel = read_f32(out_dir / "relation_emb.f32", tuple(manifest["relation_shape"]))
    return KgeModel(config=config,
                    entity_emb=ent.astype(np.float64),
                    relation_emb=rel.astype(np.float64),
                    entity_keys=manifest.get("entity_keys"),
                    relations=manifest.get("relations"),
                    best_valid_mrr=manifest.get("best_valid_mrr"),
                    step=int(manifest.get("step", 0)))
