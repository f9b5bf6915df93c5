"""Artifact writers in the kgcomplete wire formats.

Score sets bind to the sha256 of the negatives manifest they were scored
against; the consumer refuses mixed bindings, so the hash is recorded at
export time from the very directory that was scored. Embedding files carry
per-entity [CLS] vectors with the encoder and pooling recorded.
"""

import numpy as np

from .artifacts import dump_json, ensure_dir, sha256_file, write_f32
from .data import Dataset, EvalNegatives, entity_text, query_pair
from .encoding import TripleEncoder
from .model import embed_texts, score_pairs


def export_scores(model, enc: TripleEncoder, dataset: Dataset,
                  negatives: EvalNegatives, out_dir, model_name="lm",
                  batch_size=64):
    """Score every positive and candidate in manifest order and write the
    scores.tsv + manifest.json pair."""
    out = ensure_dir(out_dir)
    path = out / "scores.tsv"
    with open(path, "w", encoding="utf-8") as f:
        for q, cands in zip(negatives.queries, negatives.candidates):
            pairs = [query_pair(q, dataset)] + \
                    [query_pair(q, dataset, c) for c in cands]
            scores = score_pairs(model, enc, pairs, batch_size=batch_size)
            f.write(f"{q.index}\t{q.side}\t0\t1\t{float(scores[0])!r}\n")
            for j, s in enumerate(scores[1:]):
                f.write(f"{q.index}\t{q.side}\t{j}\t0\t{float(s)!r}\n")
    manifest = {
        "kind": "scores",
        "model": model_name,
        "n_queries": negatives.n_queries,
        "negatives_manifest": negatives.manifest_sha256,
        "files": {"scores.tsv": sha256_file(path)},
    }
    dump_json(manifest, out / "manifest.json")
    return out / "manifest.json"


def export_entity_embeddings(encoder, enc: TripleEncoder, dataset: Dataset,
                             out_dir, mode, encoder_name, batch_size=64):
    """Write one [CLS] vector per entity (metadata order) as vectors.f32
    plus a manifest recording the encoder, pooling, and whether the weights
    were frozen pretrained or fine-tuned."""
    if mode not in ("frozen", "fine-tuned"):
        raise ValueError(f"unknown mode {mode!r}")
    out = ensure_dir(out_dir)
    keys = list(dataset.entities)
    texts = [entity_text(dataset.entities[k]) for k in keys]
    vectors = embed_texts(encoder, enc, texts, batch_size=batch_size)
    vec_path = out / "vectors.f32"
    write_f32(vec_path, vectors)
    manifest = {
        "kind": "text-embeddings",
        "encoder": encoder_name,
        "mode": mode,
        "pooling": "cls-last-layer",
        "width": int(vectors.shape[1]),
        "n_entities": len(keys),
        "keys": keys,
        "files": {"vectors.f32": sha256_file(vec_path)},
    }
    dump_json(manifest, out / "manifest.json")
    return out / "manifest.json"
