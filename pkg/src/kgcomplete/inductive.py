"""Embedding rows for unseen entities, filled by copying the trained row of
the most text-similar same-type entity, plus a random-fill baseline."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import MissingVector, NoSameTypeNeighbor, ZeroVector
from .kge import KgeModel, table_widths
from .manifests import dump_json, load_json, write_f32, read_f32, sha256_file, check_hash, ensure_dir


@dataclass
class TextEmbeddingFile:
    encoder: str
    keys: List[str]
    vectors: np.ndarray
    pooling: str = "unspecified"

    def __post_init__(self):
        self._index = {k: i for i, k in enumerate(self.keys)}

    @property
    def width(self) -> int:
        return int(self.vectors.shape[1])

    def vector(self, key: str) -> np.ndarray:
        if key not in self._index:
            raise MissingVector(f"no text vector for entity key {key!r}")
        return self.vectors[self._index[key]]

    def has(self, key: str) -> bool:
        return key in self._index


def save_text_embeddings(out_dir, emb: TextEmbeddingFile):
    out_dir = ensure_dir(out_dir)
    vec_path = out_dir / "vectors.f32"
    write_f32(vec_path, emb.vectors)
    manifest = {
        "kind": "text-embeddings",
        "encoder": emb.encoder,
        "pooling": emb.pooling,
        "width": emb.width,
        "n_entities": len(emb.keys),
        "keys": emb.keys,
        "files": {"vectors.f32": sha256_file(vec_path)},
    }
    dump_json(manifest, out_dir / "manifest.json")
    return out_dir / "manifest.json"


def load_text_embeddings(out_dir) -> TextEmbeddingFile:
    out_dir = Path(out_dir)
    manifest = load_json(out_dir / "manifest.json")
    check_hash(out_dir / "vectors.f32", manifest["files"]["vectors.f32"])
    vectors = read_f32(out_dir / "vectors.f32",
                       (manifest["n_entities"], manifest["width"]))
    return TextEmbeddingFile(encoder=manifest["encoder"], keys=manifest["keys"],
                             vectors=vectors.astype(np.float64),
                             pooling=manifest.get("pooling", "unspecified"))


@dataclass
class ImputationReport:
    neighbors: Dict[str, str]
    similarities: Dict[str, float]


def cosine_sim(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"width mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(a @ b) / (na * nb)


def impute_embeddings(model: KgeModel, text_emb: TextEmbeddingFile,
                      seen, unseen, entity_types: List[str],
                      entity_keys: Optional[List[str]] = None
                      ) -> Tuple[KgeModel, ImputationReport]:
    """For each unseen entity id, find the seen entity of the same type whose
    text vector is most cosine-similar (lowest id on ties) and copy its
    trained embedding row. Seen rows are untouched."""
    keys = entity_keys if entity_keys is not None else model.entity_keys
    if keys is None:
        raise ValueError("entity keys are required to look up text vectors")
    seen = sorted(int(e) for e in seen)
    unseen = sorted(int(e) for e in unseen)
    seen_by_type: Dict[str, List[int]] = {}
    for e in seen:
        seen_by_type.setdefault(entity_types[e], []).append(e)
    # Normalized candidate matrices per type let one matmul score each
    # unseen entity against every same-type candidate.
    per_type = {}
    for etype, members in seen_by_type.items():
        mat = np.stack([text_emb.vector(keys[e]) for e in members])
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms == 0.0):
            bad = members[int(np.argmin(norms))]
            raise ZeroVector(f"zero text vector for seen entity {keys[bad]!r}")
        per_type[etype] = (np.array(members, dtype=np.int64), mat / norms[:, None])
    ent = model.entity_emb.copy()
    neighbors: Dict[str, str] = {}
    sims: Dict[str, float] = {}
    for u in unseen:
        etype = entity_types[u]
        if etype not in per_type:
            raise NoSameTypeNeighbor(
                f"no trained entity of type {etype!r} for unseen entity {keys[u]!r}")
        members, mat = per_type[etype]
        v = text_emb.vector(keys[u])
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            raise ZeroVector(f"zero text vector for unseen entity {keys[u]!r}")
        scores = mat @ (v / nv)
        best = int(np.argmax(scores))
        neighbor = int(members[best])
        ent[u] = model.entity_emb[neighbor]
        neighbors[keys[u]] = keys[neighbor]
        sims[keys[u]] = float(scores[best])
    imputed = KgeModel(config=model.config, entity_emb=ent,
                       relation_emb=model.relation_emb.copy(),
                       entity_keys=model.entity_keys, relations=model.relations,
                       best_valid_mrr=model.best_valid_mrr, step=model.step)
    return imputed, ImputationReport(neighbors=neighbors, similarities=sims)


def random_baseline(model: KgeModel, unseen, seed: int) -> KgeModel:
    """Unseen rows drawn from the initialization distribution; the
    lower-bound comparison for imputation."""
    rng = np.random.default_rng([seed, 4])
    ent = model.entity_emb.copy()
    ew, _ = table_widths(model.config.model_kind, model.config.dim)
    bound = 0.5 / model.config.dim
    for u in sorted(int(e) for e in unseen):
        ent[u] = rng.uniform(-bound, bound, size=ew)
    return KgeModel(config=model.config, entity_emb=ent,
                    relation_emb=model.relation_emb.copy(),
                    entity_keys=model.entity_keys, relations=model.relations,
                    best_valid_mrr=model.best_valid_mrr, step=model.step)


def save_report(path, report: ImputationReport):
    dump_json({
        "kind": "imputation-report",
        "neighbors": report.neighbors,
        "similarities": report.similarities,
    }, path)


def load_report(path) -> ImputationReport:
    data = load_json(path)
    return ImputationReport(neighbors=data["neighbors"],
                            similarities=data["similarities"])
