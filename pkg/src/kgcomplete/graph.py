"""Typed knowledge graph data model, TSV loaders, and adjacency queries.

Graphs are immutable after construction: entities carry dense ids assigned
in metadata-file order, relations in first-seen triple order, and the
adjacency indices are derived once from the deduplicated triple list.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import MalformedLine, MissingEntityMetadata, UnknownEntity


class Triple(NamedTuple):
    head: int
    rel: int
    tail: int


@dataclass(frozen=True)
class EntityRecord:
    id: int
    key: str
    etype: str
    name: str
    description: Optional[str] = None


def entity_text(rec: EntityRecord) -> str:
    """Entity text used by every text consumer: the trimmed name, followed by
    a single space and the trimmed description when one is present."""
    name = rec.name.strip()
    desc = (rec.description or "").strip()
    return f"{name} {desc}" if desc else name


class KnowledgeGraph:
    """Entities, relations, and a deduplicated ordered triple list.

    triples is an (n, 3) int64 array of (head, rel, tail) dense ids.
    out_adj[e] / in_adj[e] hold the indices of triples with head / tail e.
    """

    def __init__(self, entities, relations, triples, duplicates_dropped=0):
        self.entities = list(entities)
        self.relations = list(relations)
        self.triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        self.duplicates_dropped = duplicates_dropped
        self.key_to_id = {e.key: e.id for e in self.entities}
        self.relation_to_id = {r: i for i, r in enumerate(self.relations)}
        self.entity_types = [e.etype for e in self.entities]
        self.type_set = sorted(set(self.entity_types))
        self._build_indices()

    def _build_indices(self):
        n = len(self.entities)
        self.out_adj = [[] for _ in range(n)]
        self.in_adj = [[] for _ in range(n)]
        for i, (h, r, t) in enumerate(self.triples):
            self.out_adj[int(h)].append(i)
            self.in_adj[int(t)].append(i)
        self.out_adj = [np.asarray(a, dtype=np.int64) for a in self.out_adj]
        self.in_adj = [np.asarray(a, dtype=np.int64) for a in self.in_adj]
        by_type = {}
        for e in self.entities:
            by_type.setdefault(e.etype, []).append(e.id)
        self.type_to_entities = {k: np.asarray(v, dtype=np.int64) for k, v in by_type.items()}
        self.triple_set = {(int(h), int(r), int(t)) for h, r, t in self.triples}

    @property
    def num_entities(self):
        return len(self.entities)

    @property
    def num_relations(self):
        return len(self.relations)

    @property
    def num_triples(self):
        return self.triples.shape[0]

    def triple(self, i) -> Triple:
        h, r, t = self.triples[i]
        return Triple(int(h), int(r), int(t))

    def has_triple(self, h, r, t) -> bool:
        return (int(h), int(r), int(t)) in self.triple_set

    def entity(self, e) -> EntityRecord:
        if not 0 <= e < len(self.entities):
            raise UnknownEntity(f"entity id {e} out of range")
        return self.entities[e]

    def with_triples(self, triples) -> "KnowledgeGraph":
        """Same entity/relation universe over a different triple list (used
        to restrict feature computation to the training graph)."""
        return KnowledgeGraph(self.entities, self.relations, triples)

    def neighbors(self, e, direction="both"):
        """Distinct neighbor ids of e over out-edges, in-edges, or both."""
        if not 0 <= e < len(self.entities):
            raise UnknownEntity(f"entity id {e} out of range")
        if direction not in ("out", "in", "both"):
            raise ValueError(f"direction must be out/in/both, got {direction!r}")
        result = set()
        if direction in ("out", "both"):
            for i in self.out_adj[e]:
                result.add(int(self.triples[i, 2]))
        if direction in ("in", "both"):
            for i in self.in_adj[e]:
                result.add(int(self.triples[i, 0]))
        return result

    def degrees(self, triples=None):
        """(in_degree, out_degree) int64 arrays over the given triple array
        (defaults to the graph's own)."""
        tr = self.triples if triples is None else np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        n = len(self.entities)
        out_deg = np.bincount(tr[:, 0], minlength=n).astype(np.int64)
        in_deg = np.bincount(tr[:, 2], minlength=n).astype(np.int64)
        return in_deg, out_deg


def neighbors(kg: KnowledgeGraph, e: int, direction: str = "both"):
    return kg.neighbors(e, direction)


def _read_tsv(path, n_cols, allow_extra_empty=False):
    """Yield (lineno, fields) for each non-empty line; enforces the exact
    column count. Tabs inside fields are indistinguishable from separators,
    so they surface here as a wrong column count."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != n_cols:
                raise MalformedLine(path, lineno, f"expected {n_cols} columns, got {len(fields)}")
            yield lineno, fields


def load_metadata(metadata_path):
    """Entity records from a `key \\t type \\t name \\t description` TSV.

    Dense ids follow first appearance in the file; names and descriptions
    are trimmed, and an empty description is treated as absent.
    """
    entities = []
    seen = {}
    for lineno, (key, etype, name, desc) in _read_tsv(metadata_path, 4):
        if key in seen:
            raise MalformedLine(metadata_path, lineno, f"duplicate entity key {key!r}")
        name = name.strip()
        if not name:
            raise MalformedLine(metadata_path, lineno, f"empty name for entity {key!r}")
        etype = etype.strip()
        if not etype:
            raise MalformedLine(metadata_path, lineno, f"empty type for entity {key!r}")
        desc = desc.strip()
        rec = EntityRecord(id=len(entities), key=key, etype=etype, name=name,
                           description=desc if desc else None)
        seen[key] = rec.id
        entities.append(rec)
    return entities


def load_graph(triples_path, metadata_path) -> KnowledgeGraph:
    """Load a graph from a triples TSV and an entity-metadata TSV.

    Duplicate triples are dropped (the count is kept on the graph); a triple
    referencing a key absent from the metadata raises MissingEntityMetadata.
    """
    entities = load_metadata(metadata_path)
    key_to_id = {e.key: e.id for e in entities}
    relations = []
    rel_ids = {}
    triples = []
    seen = set()
    dropped = 0
    for lineno, (hk, rl, tk) in _read_tsv(triples_path, 3):
        if hk not in key_to_id:
            raise MissingEntityMetadata(f"{triples_path}:{lineno}: head key {hk!r} not in metadata")
        if tk not in key_to_id:
            raise MissingEntityMetadata(f"{triples_path}:{lineno}: tail key {tk!r} not in metadata")
        if rl not in rel_ids:
            rel_ids[rl] = len(relations)
            relations.append(rl)
        t = (key_to_id[hk], rel_ids[rl], key_to_id[tk])
        if t in seen:
            dropped += 1
            continue
        seen.add(t)
        triples.append(t)
    arr = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    return KnowledgeGraph(entities, relations, arr, duplicates_dropped=dropped)


def write_triples_tsv(path, kg: KnowledgeGraph, triples):
    """Write triples (rows of dense ids) back to the external TSV format."""
    with open(path, "w", encoding="utf-8") as f:
        for h, r, t in np.asarray(triples, dtype=np.int64).reshape(-1, 3):
            f.write(f"{kg.entities[h].key}\t{kg.relations[r]}\t{kg.entities[t].key}\n")
