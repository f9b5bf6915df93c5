import numpy as np
import pytest

from kgcomplete.graph import EntityRecord, KnowledgeGraph


def build_kg(n_per_type=None, triples=None, descriptions=None, names=None):
    """Programmatic KnowledgeGraph: entity keys E0.., types cycled from the
    given counts, triples as (h, rel_label, t) index tuples."""
    n_per_type = n_per_type or {"a": 4, "b": 4}
    entities = []
    i = 0
    for etype, n in n_per_type.items():
        for _ in range(n):
            name = names[i] if names and i < len(names) else f"entity {i}"
            desc = descriptions[i] if descriptions and i < len(descriptions) else f"about {i}"
            entities.append(EntityRecord(id=i, key=f"E{i}", etype=etype,
                                         name=name, description=desc))
            i += 1
    triples = triples if triples is not None else []
    relations = []
    rows = []
    for h, r, t in triples:
        if r not in relations:
            relations.append(r)
        rows.append((h, relations.index(r), t))
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    return KnowledgeGraph(entities, relations, rows)


def random_typed_kg(rng, n_types=2, entities_per_type=10, n_relations=3,
                    n_triples=80):
    """Random KG whose relations connect fixed (head type, tail type) pairs,
    so type-aware corruption always has candidates."""
    type_names = [f"t{i}" for i in range(n_types)]
    counts = {t: entities_per_type for t in type_names}
    rel_sig = [(f"r{i}",
                type_names[int(rng.integers(0, n_types))],
                type_names[int(rng.integers(0, n_types))])
               for i in range(n_relations)]
    by_type = {}
    idx = 0
    for t, n in counts.items():
        by_type[t] = list(range(idx, idx + n))
        idx += n
    triples = set()
    while len(triples) < n_triples:
        r, ht, tt = rel_sig[int(rng.integers(0, n_relations))]
        h = by_type[ht][int(rng.integers(0, entities_per_type))]
        t = by_type[tt][int(rng.integers(0, entities_per_type))]
        triples.add((h, r, t))
    return build_kg(counts, sorted(triples))


@pytest.fixture
def chain_kg():
    """a0 -> b4 -> a1 -> b5 diamond-ish graph with both types used."""
    triples = [(0, "r0", 4), (4, "r1", 1), (1, "r0", 5), (2, "r0", 6),
               (3, "r0", 7), (6, "r1", 0), (7, "r1", 2), (5, "r1", 3)]
    return build_kg({"a": 4, "b": 4}, triples)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted kernels once so per-test runtime budgets hold."""
    from kgcomplete import kernels
    ent = np.zeros((3, 4))
    rel = np.zeros((2, 4))
    idx = np.zeros(1, dtype=np.int64)
    coeff = np.zeros(1)
    for kind in ("transe", "distmult", "complex"):
        getattr(kernels, f"{kind}_scores")(ent, rel, idx, idx, idx)
        getattr(kernels, f"{kind}_grads")(ent, rel, idx, idx, idx, coeff,
                                          np.zeros_like(ent), np.zeros_like(rel))
    ent2 = np.zeros((3, 4))
    rel2 = np.zeros((2, 2))
    kernels.rotate_scores(ent2, rel2, idx, idx, idx)
    kernels.rotate_grads(ent2, rel2, idx, idx, idx, coeff,
                         np.zeros_like(ent2), np.zeros_like(rel2))
    kernels.l3_penalty(ent, np.array([0], dtype=np.int64))
    kernels.l3_add_grad(ent, np.array([0], dtype=np.int64), 1e-5,
                        np.zeros_like(ent))
    kernels.adam_update(ent.copy(), np.zeros_like(ent), np.zeros_like(ent),
                        np.zeros_like(ent), 1e-3, 0.9, 0.999, 1e-8, 1)
    kernels.levenshtein(np.array([1], dtype=np.int64),
                        np.array([1, 2], dtype=np.int64))
    kernels.split_scan(np.array([0.0, 1.0]), np.array([1.0, -1.0]),
                       np.array([1.0, 1.0]), 1.0, 0.0)
    yield
