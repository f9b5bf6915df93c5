"""Readers for the kgcomplete dataset and artifact file formats.

Everything here works on the files alone: metadata/triples TSVs, split
directories (train/valid/test.tsv + manifest.json), and negatives
directories (queries.tsv + negatives.tsv + manifest.json). Negatives are
the load-bearing input for scoring, so their bytes are verified against
the manifest before use.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .artifacts import check_hash, load_json
from .errors import ManifestMismatch


@dataclass(frozen=True)
class EntityInfo:
    key: str
    etype: str
    name: str
    description: Optional[str] = None


def entity_text(rec: EntityInfo) -> str:
    """Trimmed name, then a single space and the trimmed description when
    present; must stay identical to the consumer's convention so scores and
    embeddings refer to the same strings."""
    name = rec.name.strip()
    desc = (rec.description or "").strip()
    return f"{name} {desc}" if desc else name


def _read_tsv(path, n_cols):
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != n_cols:
                raise ValueError(f"{path}:{lineno}: expected {n_cols} columns, "
                                 f"got {len(fields)}")
            rows.append(fields)
    return rows


@dataclass
class Dataset:
    entities: Dict[str, EntityInfo]      # key -> record, metadata file order
    relations: List[str]                 # first-appearance order in triples
    triples: List[Tuple[str, str, str]]  # (head_key, relation, tail_key)

    @property
    def relation_index(self):
        return {r: i for i, r in enumerate(self.relations)}

    def text(self, key) -> str:
        return entity_text(self.entities[key])

    def keys_by_type(self):
        out: Dict[str, List[str]] = {}
        for key, rec in self.entities.items():
            out.setdefault(rec.etype, []).append(key)
        return out


def load_dataset(metadata_path, triples_path) -> Dataset:
    entities = {}
    for key, etype, name, desc in _read_tsv(metadata_path, 4):
        if key in entities:
            raise ValueError(f"duplicate entity key {key!r}")
        entities[key] = EntityInfo(key=key, etype=etype, name=name,
                                   description=desc or None)
    relations: List[str] = []
    triples = []
    for hk, rel, tk in _read_tsv(triples_path, 3):
        for k in (hk, tk):
            if k not in entities:
                raise ValueError(f"triple references unknown entity {k!r}")
        if rel not in relations:
            relations.append(rel)
        triples.append((hk, rel, tk))
    return Dataset(entities=entities, relations=relations, triples=triples)


def load_split_dir(split_dir) -> Dict[str, List[Tuple[str, str, str]]]:
    split_dir = Path(split_dir)
    manifest = load_json(split_dir / "manifest.json")
    parts = {}
    for name in ("train", "valid", "test"):
        path = split_dir / f"{name}.tsv"
        check_hash(path, manifest["files"][f"{name}.tsv"], "split file")
        parts[name] = [tuple(row) for row in _read_tsv(path, 3)]
    return parts


@dataclass(frozen=True)
class EvalQuery:
    index: int
    partition: str  # valid | test
    side: str       # head | tail
    head: str
    relation: str
    tail: str


@dataclass
class EvalNegatives:
    queries: List[EvalQuery]
    candidates: List[List[str]]  # per query, file (= scoring) order
    m_eval: int
    manifest_path: Path
    manifest_sha256: str

    @property
    def n_queries(self):
        return len(self.queries)


def load_negatives_dir(neg_dir) -> EvalNegatives:
    neg_dir = Path(neg_dir)
    manifest_path = neg_dir / "manifest.json"
    if not manifest_path.exists():
        raise ManifestMismatch(f"negatives manifest {manifest_path} is missing")
    manifest = load_json(manifest_path)
    check_hash(neg_dir / "queries.tsv", manifest["files"]["queries.tsv"], "queries file")
    check_hash(neg_dir / "negatives.tsv", manifest["files"]["negatives.tsv"], "negatives file")

    queries = []
    for idx, partition, side, hk, rel, tk in _read_tsv(neg_dir / "queries.tsv", 6):
        q = EvalQuery(index=int(idx), partition=partition, side=side,
                      head=hk, relation=rel, tail=tk)
        if q.index != len(queries):
            raise ValueError(f"queries.tsv out of order at index {q.index}")
        queries.append(q)

    candidates: List[List[str]] = [[] for _ in queries]
    for idx, side, key in _read_tsv(neg_dir / "negatives.tsv", 3):
        candidates[int(idx)].append(key)

    from .artifacts import sha256_file
    return EvalNegatives(queries=queries, candidates=candidates,
                         m_eval=int(manifest["m_eval"]),
                         manifest_path=manifest_path,
                         manifest_sha256=sha256_file(manifest_path))


def query_pair(q: EvalQuery, dataset: Dataset, candidate=None):
    """(head_text, tail_text) for the positive, or with the query-side
    entity replaced by the candidate key."""
    hk, tk = q.head, q.tail
    if candidate is not None:
        if q.side == "head":
            hk = candidate
        else:
            tk = candidate
    return dataset.text(hk), dataset.text(tk)
