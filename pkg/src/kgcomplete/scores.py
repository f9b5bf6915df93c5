"""ScoreSet: the per-query score matrix exchanged between scoring models.

One ScoreSet holds, for every evaluation query, the positive's score and the
scores of its fixed negatives in NegativeSets order. Files carry the hash of
the NegativeSets manifest they were scored against; integration refuses
ScoreSets whose bindings disagree.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import MisalignedScoreSets
from .manifests import check_hash, dump_json, load_json, sha256_file


@dataclass
class ScoreSet:
    model_name: str
    pos: np.ndarray                 # (n_queries,)
    negs: List[np.ndarray]          # per query, NegativeSets candidate order
    negatives_manifest: Optional[str] = None
    sides: Optional[List[str]] = None

    @property
    def n_queries(self):
        return int(self.pos.shape[0])

    def check_finite(self):
        if not np.all(np.isfinite(self.pos)) or any(not np.all(np.isfinite(n)) for n in self.negs):
            raise MisalignedScoreSets(f"non-finite scores in {self.model_name}")


def check_aligned(score_sets):
    """All ScoreSets must agree on query count, per-query candidate counts,
    and (when recorded) the NegativeSets manifest they were scored against."""
    if not score_sets:
        raise MisalignedScoreSets("no score sets given")
    first = score_sets[0]
    for other in score_sets[1:]:
        if other.n_queries != first.n_queries:
            raise MisalignedScoreSets(
                f"{other.model_name} has {other.n_queries} queries, "
                f"{first.model_name} has {first.n_queries}")
        for i, (a, b) in enumerate(zip(first.negs, other.negs)):
            if a.shape[0] != b.shape[0]:
                raise MisalignedScoreSets(
                    f"query {i}: candidate counts differ "
                    f"({first.model_name}={a.shape[0]}, {other.model_name}={b.shape[0]})")
        if (first.negatives_manifest and other.negatives_manifest
                and first.negatives_manifest != other.negatives_manifest):
            raise MisalignedScoreSets(
                f"{other.model_name} bound to different negatives than {first.model_name}")


def combine(score_sets, weights) -> ScoreSet:
    """Weighted sum of aligned ScoreSets.

    weights is either a (k,) vector applied to every query or a
    (n_queries, k) matrix of per-query weights; within a query the same
    weights are applied to the positive and all its negatives.
    """
    check_aligned(score_sets)
    k = len(score_sets)
    nq = score_sets[0].n_queries
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 1:
        w = np.broadcast_to(w, (nq, k))
    if w.shape != (nq, k):
        raise MisalignedScoreSets(f"weights shape {w.shape} != ({nq}, {k})")
    pos = np.zeros(nq)
    for i, s in enumerate(score_sets):
        pos += w[:, i] * s.pos
    negs = []
    for q in range(nq):
        acc = np.zeros(score_sets[0].negs[q].shape[0])
        for i, s in enumerate(score_sets):
            acc += w[q, i] * s.negs[q]
        negs.append(acc)
    name = "+".join(s.model_name for s in score_sets)
    return ScoreSet(model_name=name, pos=pos, negs=negs,
                    negatives_manifest=score_sets[0].negatives_manifest)


def save_scores(score_set: ScoreSet, out_dir, negatives_manifest_path=None):
    """Write `query_index, side, candidate_rank_position, is_positive, score`
    rows; the positive carries position 0 with is_positive=1."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sides = score_set.sides or ["head"] * score_set.n_queries
    path = out / "scores.tsv"
    with open(path, "w", encoding="utf-8") as f:
        for q in range(score_set.n_queries):
            f.write(f"{q}\t{sides[q]}\t0\t1\t{float(score_set.pos[q])!r}\n")
            for j, s in enumerate(score_set.negs[q]):
                f.write(f"{q}\t{sides[q]}\t{j}\t0\t{float(s)!r}\n")
    binding = score_set.negatives_manifest
    if negatives_manifest_path is not None:
        binding = sha256_file(negatives_manifest_path)
    manifest = {
        "kind": "scores",
        "model": score_set.model_name,
        "n_queries": score_set.n_queries,
        "negatives_manifest": binding,
        "files": {"scores.tsv": sha256_file(path)},
    }
    dump_json(manifest, out / "manifest.json")
    return out / "manifest.json"


def load_scores(score_dir, verify=True) -> ScoreSet:
    score_dir = Path(score_dir)
    manifest = load_json(score_dir / "manifest.json")
    if verify:
        check_hash(score_dir / "scores.tsv", manifest["files"]["scores.tsv"], "scores file")
    nq = manifest["n_queries"]
    pos = np.full(nq, np.nan)
    sides = [None] * nq
    negs = [[] for _ in range(nq)]
    with open(score_dir / "scores.tsv", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            q, side, pos_idx, is_pos, score = line.split("\t")
            q = int(q)
            sides[q] = side
            if is_pos == "1":
                pos[q] = float(score)
            else:
                negs[q].append((int(pos_idx), float(score)))
    out_negs = []
    for q in range(nq):
        negs[q].sort(key=lambda x: x[0])
        out_negs.append(np.asarray([s for _, s in negs[q]], dtype=np.float64))
    if np.any(np.isnan(pos)):
        raise MisalignedScoreSets(f"{score_dir}: missing positive scores")
    return ScoreSet(model_name=manifest["model"], pos=pos, negs=out_negs,
                    negatives_manifest=manifest.get("negatives_manifest"), sides=sides)
