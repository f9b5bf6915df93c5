"""Per-triple feature vectors: graph centralities, neighbor overlap, and
text statistics, plus a trailing block of model scores.

All graph-derived quantities (degrees, PageRank, Adamic-Adar) are computed
on whatever graph the extractor is built with; callers pass the training
graph so evaluation edges never leak into features.
"""

import math
import re
import unicodedata
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import SchemaMismatch
from .graph import KnowledgeGraph, Triple
from .kernels import levenshtein
from .manifests import dump_json, load_json, sha256_file, check_hash, ensure_dir

SCHEMA_VERSION = "v1"

_UNKNOWN_RE = re.compile(r"\bunknown\b", re.IGNORECASE)

# Per-side text columns, in emission order. Description numerics are zeroed
# when the description is missing; desc_missing carries the signal instead.
_TEXT_KEYS = [
    "name_chars", "name_unknown",
    "name_punct_count", "name_punct_ratio",
    "name_numeric_count", "name_numeric_ratio",
    "name_tokens_per_word",
    "desc_missing", "desc_chars", "desc_unknown",
    "desc_punct_count", "desc_punct_ratio",
    "desc_numeric_count", "desc_numeric_ratio",
    "desc_tokens_per_word",
]


def pagerank(kg: KnowledgeGraph, damping: float = 0.85, tol: float = 1e-9,
             max_iter: int = 200) -> np.ndarray:
    """Power iteration on the directed triple graph. Uniform teleport,
    dangling mass redistributed uniformly; stops when the L1 change drops
    below tol."""
    n = kg.num_entities
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    heads = kg.triples[:, 0] if kg.num_triples else np.zeros(0, dtype=np.int64)
    tails = kg.triples[:, 2] if kg.num_triples else np.zeros(0, dtype=np.int64)
    out_deg = np.bincount(heads, minlength=n).astype(np.float64)
    dangling = out_deg == 0
    r = np.full(n, 1.0 / n, dtype=np.float64)
    for _ in range(max_iter):
        contrib = np.zeros(n, dtype=np.float64)
        if heads.size:
            contrib = np.bincount(tails, weights=r[heads] / out_deg[heads], minlength=n)
        dangling_mass = float(r[dangling].sum())
        r_new = (1.0 - damping) / n + damping * (contrib + dangling_mass / n)
        delta = float(np.abs(r_new - r).sum())
        r = r_new
        if delta < tol:
            break
    return r


def adamic_adar(kg: KnowledgeGraph, h: int, t: int) -> float:
    """Sum of 1/ln(deg(u)) over common undirected neighbors u of h and t.
    deg(u) counts distinct undirected neighbors; deg(u) <= 1 is skipped
    (ln 1 = 0 would blow up, and such nodes carry no overlap signal)."""
    common = kg.neighbors(h, "both") & kg.neighbors(t, "both")
    total = 0.0
    for u in common:
        deg = len(kg.neighbors(u, "both"))
        if deg <= 1:
            continue
        total += 1.0 / math.log(deg)
    return total


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over Unicode code points."""
    xa = np.array([ord(c) for c in a], dtype=np.int64)
    xb = np.array([ord(c) for c in b], dtype=np.int64)
    return int(levenshtein(xa, xb))


def load_vocab(path) -> List[str]:
    """One subword per line; blank lines ignored."""
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.rstrip("\n")]


class Vocab:
    """Greedy longest-match subword segmenter."""

    def __init__(self, subwords: Sequence[str]):
        self.subwords = set(subwords)
        self.max_len = max((len(s) for s in self.subwords), default=0)

    def count_tokens(self, word: str) -> int:
        """Tokens consumed by greedy longest-prefix matching; characters
        with no matching subword count as one token each."""
        i, tokens = 0, 0
        n = len(word)
        while i < n:
            step = 1
            for length in range(min(self.max_len, n - i), 0, -1):
                if word[i:i + length] in self.subwords:
                    step = length
                    break
            tokens += 1
            i += step
        return tokens


def _char_stats(text: str) -> Tuple[int, int, int]:
    punct = 0
    numeric = 0
    for ch in text:
        cat = unicodedata.category(ch)
        if cat.startswith("P"):
            punct += 1
        elif cat == "Nd":
            numeric += 1
    return len(text), punct, numeric


def _tokens_per_word(text: str, vocab: Optional[Vocab]) -> float:
    words = text.split()
    if not words:
        return 0.0
    if vocab is None:
        return 1.0
    tokens = sum(vocab.count_tokens(w) for w in words)
    return tokens / len(words)


def text_features(rec, vocab: Optional[Vocab] = None) -> Dict[str, float]:
    """Named numeric map over the record's name and description."""
    out: Dict[str, float] = {}
    n_chars, n_punct, n_num = _char_stats(rec.name)
    out["name_chars"] = float(n_chars)
    out["name_unknown"] = 1.0 if _UNKNOWN_RE.search(rec.name) else 0.0
    out["name_punct_count"] = float(n_punct)
    out["name_punct_ratio"] = n_punct / n_chars if n_chars else 0.0
    out["name_numeric_count"] = float(n_num)
    out["name_numeric_ratio"] = n_num / n_chars if n_chars else 0.0
    out["name_tokens_per_word"] = _tokens_per_word(rec.name, vocab)
    desc = rec.description
    if desc is None:
        out["desc_missing"] = 1.0
        for key in _TEXT_KEYS:
            if key.startswith("desc_") and key != "desc_missing":
                out[key] = 0.0
        return out
    d_chars, d_punct, d_num = _char_stats(desc)
    out["desc_missing"] = 0.0
    out["desc_chars"] = float(d_chars)
    out["desc_unknown"] = 1.0 if _UNKNOWN_RE.search(desc) else 0.0
    out["desc_punct_count"] = float(d_punct)
    out["desc_punct_ratio"] = d_punct / d_chars if d_chars else 0.0
    out["desc_numeric_count"] = float(d_num)
    out["desc_numeric_ratio"] = d_num / d_chars if d_chars else 0.0
    out["desc_tokens_per_word"] = _tokens_per_word(desc, vocab)
    return out


@dataclass
class FeatureSchema:
    """Ordered column layout. One-hot blocks list their categories in a
    fixed, documented order: entity types sorted lexicographically,
    relations in first-seen graph order, model scores in declared order."""
    columns: List[Tuple[str, str]]
    version: str = SCHEMA_VERSION

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.columns]

    @property
    def width(self) -> int:
        return len(self.columns)


@dataclass
class FeatureVector:
    values: np.ndarray
    triple: Triple


def build_schema(kg: KnowledgeGraph, model_names: Sequence[str]) -> FeatureSchema:
    cols: List[Tuple[str, str]] = []
    for etype in kg.type_set:
        cols.append((f"head_type={etype}", "categorical-one-hot"))
    for etype in kg.type_set:
        cols.append((f"tail_type={etype}", "categorical-one-hot"))
    for rel in kg.relations:
        cols.append((f"relation={rel}", "categorical-one-hot"))
    for name in ("head_in_degree", "head_out_degree",
                 "tail_in_degree", "tail_out_degree",
                 "head_pagerank", "tail_pagerank",
                 "adamic_adar", "name_edit_distance"):
        cols.append((name, "numeric"))
    for side in ("head", "tail"):
        for key in _TEXT_KEYS:
            cols.append((f"{side}_{key}", "numeric"))
    for model in model_names:
        cols.append((f"score={model}", "numeric"))
    return FeatureSchema(columns=cols)


class FeatureExtractor:
    """Featurizes triples against a fixed graph. Build it with the training
    graph; PageRank is computed once at construction."""

    def __init__(self, kg: KnowledgeGraph, model_names: Sequence[str],
                 vocab: Optional[Vocab] = None,
                 damping: float = 0.85, tol: float = 1e-9, max_iter: int = 200):
        self.kg = kg
        self.model_names = list(model_names)
        self.vocab = vocab
        self.schema = build_schema(kg, self.model_names)
        self.in_deg, self.out_deg = kg.degrees()
        self.pr = pagerank(kg, damping=damping, tol=tol, max_iter=max_iter)
        self._type_pos = {t: i for i, t in enumerate(kg.type_set)}
        self._text_cache: Dict[int, Dict[str, float]] = {}

    def _text(self, e: int) -> Dict[str, float]:
        if e not in self._text_cache:
            self._text_cache[e] = text_features(self.kg.entities[e], self.vocab)
        return self._text_cache[e]

    def featurize(self, t: Triple, model_scores: Sequence[float]) -> FeatureVector:
        if len(model_scores) != len(self.model_names):
            raise SchemaMismatch(
                f"expected {len(self.model_names)} model scores, got {len(model_scores)}")
        kg = self.kg
        n_types = len(kg.type_set)
        vals = np.zeros(self.schema.width, dtype=np.float64)
        pos = 0
        vals[pos + self._type_pos[kg.entity_types[t.head]]] = 1.0
        pos += n_types
        vals[pos + self._type_pos[kg.entity_types[t.tail]]] = 1.0
        pos += n_types
        vals[pos + t.rel] = 1.0
        pos += kg.num_relations
        vals[pos:pos + 4] = (self.in_deg[t.head], self.out_deg[t.head],
                             self.in_deg[t.tail], self.out_deg[t.tail])
        pos += 4
        vals[pos] = self.pr[t.head]
        vals[pos + 1] = self.pr[t.tail]
        pos += 2
        vals[pos] = adamic_adar(kg, t.head, t.tail)
        pos += 1
        vals[pos] = edit_distance(kg.entities[t.head].name, kg.entities[t.tail].name)
        pos += 1
        for e in (t.head, t.tail):
            text = self._text(e)
            for key in _TEXT_KEYS:
                vals[pos] = text[key]
                pos += 1
        for s in model_scores:
            vals[pos] = float(s)
            pos += 1
        return FeatureVector(values=vals, triple=t)

    def featurize_queries(self, queries, scores_per_model: Sequence[np.ndarray]) -> np.ndarray:
        """One row per query; scores_per_model holds each model's positive
        scores aligned to the query order."""
        if len(scores_per_model) != len(self.model_names):
            raise SchemaMismatch(
                f"expected {len(self.model_names)} score columns, got {len(scores_per_model)}")
        rows = np.zeros((len(queries), self.schema.width), dtype=np.float64)
        for i, q in enumerate(queries):
            scores = [float(col[q.index]) for col in scores_per_model]
            rows[i] = self.featurize(q.triple, scores).values
        return rows


def save_features(out_dir, matrix: np.ndarray, schema: FeatureSchema,
                  model_names: Sequence[str], extra_manifest=None):
    out_dir = ensure_dir(out_dir)
    path = out_dir / "features.tsv"
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(schema.names) + "\n")
        for row in matrix:
            f.write("\t".join(repr(float(v)) for v in row) + "\n")
    manifest = {
        "kind": "features",
        "schema_version": schema.version,
        "columns": [list(c) for c in schema.columns],
        "model_names": list(model_names),
        "n_rows": int(matrix.shape[0]),
        "n_cols": int(matrix.shape[1]),
        "files": {"features.tsv": sha256_file(path)},
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    dump_json(manifest, out_dir / "manifest.json")
    return out_dir / "manifest.json"


def load_features(out_dir):
    from pathlib import Path
    out_dir = Path(out_dir)
    manifest = load_json(out_dir / "manifest.json")
    path = out_dir / "features.tsv"
    check_hash(path, manifest["files"]["features.tsv"])
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        rows = [line.rstrip("\n").split("\t") for line in f]
    schema = FeatureSchema(columns=[tuple(c) for c in manifest["columns"]],
                           version=manifest["schema_version"])
    if header != schema.names:
        raise SchemaMismatch("feature file header does not match manifest columns")
    matrix = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    if matrix.size == 0:
        matrix = matrix.reshape(0, schema.width)
    return matrix, schema, manifest
