"""Train/valid/test split construction and fixed filtered negative sets.

Transductive splits remove random edges while keeping every entity attached
to the training graph; inductive splits hold out entities so that every
evaluation triple has at least one endpoint with no training edges. Negative
candidate sets are type-matched, filtered against all known positives, and
drawn from per-query seeded substreams so regeneration is order-independent.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple

import numpy as np

from .errors import SplitInfeasible
from .graph import KnowledgeGraph, Triple, write_triples_tsv
from .manifests import check_hash, dump_json, load_json, sha256_file


@dataclass
class Split:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    mode: str
    seed: int
    valid_frac: float
    test_frac: float

    def counts(self):
        return {"train": int(self.train.shape[0]),
                "valid": int(self.valid.shape[0]),
                "test": int(self.test.shape[0])}


def _partition_sizes(n_triples, valid_frac, test_frac):
    """Training keeps ceil((1 - vf - tf) * n); the remainder is split
    valid/test at the requested ratio with the odd edge going to test."""
    if valid_frac < 0 or test_frac < 0 or valid_frac + test_frac >= 1:
        raise ValueError("require valid_frac + test_frac < 1")
    n_train = math.ceil((1.0 - valid_frac - test_frac) * n_triples)
    n_removed = n_triples - n_train
    hold = valid_frac + test_frac
    n_valid = math.floor(n_removed * (valid_frac / hold)) if hold > 0 else 0
    return n_removed, n_valid, n_removed - n_valid


def _split_removed(removed, n_valid, rng):
    removed = np.asarray(removed, dtype=np.int64)
    order = rng.permutation(removed.shape[0])
    shuffled = removed[order]
    return shuffled[:n_valid], shuffled[n_valid:]


def make_transductive_split(kg: KnowledgeGraph, valid_frac, test_frac, seed) -> Split:
    """Remove random edges whose endpoints both keep positive degree, per
    the sample-check-remove loop; rejection-bounded at 100 * |T| consecutive
    failures."""
    n = kg.num_triples
    n_removed_target, n_valid, _ = _partition_sizes(n, valid_frac, test_frac)
    rng = np.random.default_rng(seed)
    triples = kg.triples
    deg = np.zeros(kg.num_entities, dtype=np.int64)
    for h, _, t in triples:
        deg[h] += 1
        deg[t] += 1

    pool = list(range(n))
    removed = []
    rejections = 0
    limit = 100 * max(n, 1)
    while len(removed) < n_removed_target:
        pos = int(rng.integers(len(pool)))
        i = pool[pos]
        h, _, t = triples[i]
        # self-loops cost a node two degree units, hence the stricter check
        loss = 2 if h == t else 1
        if deg[h] - loss >= 1 and deg[t] - loss >= 1:
            deg[h] -= 1
            deg[t] -= 1
            pool[pos] = pool[-1]
            pool.pop()
            removed.append(i)
            rejections = 0
        else:
            rejections += 1
            if rejections >= limit:
                raise SplitInfeasible(
                    f"no removable edge after {rejections} consecutive rejections "
                    f"({len(removed)}/{n_removed_target} removed)")

    valid_idx, test_idx = _split_removed(removed, n_valid, rng)
    keep = np.ones(n, dtype=bool)
    keep[np.asarray(removed, dtype=np.int64)] = False
    return Split(train=triples[keep], valid=triples[valid_idx], test=triples[test_idx],
                 mode="transductive", seed=int(seed),
                 valid_frac=float(valid_frac), test_frac=float(test_frac))


def make_inductive_split(kg: KnowledgeGraph, valid_frac, test_frac, seed,
                         tolerance=0.01) -> Split:
    """Hold out a prefix of a seeded entity permutation; all triples incident
    to held-out entities move to valid/test. The prefix length is searched so
    the evaluation size lands within the relative tolerance of the target."""
    n = kg.num_triples
    target, n_valid, _ = _partition_sizes(n, valid_frac, test_frac)
    if target == 0:
        raise SplitInfeasible("requested fractions remove zero triples")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(kg.num_entities)

    # removed-count is monotone in the prefix length, so binary search the
    # smallest prefix reaching the target, then compare with its predecessor.
    def removed_count(u):
        unseen = set(int(e) for e in perm[:u])
        mask = np.fromiter(((int(h) in unseen) or (int(t) in unseen)
                            for h, _, t in kg.triples), dtype=bool, count=n)
        return mask, int(mask.sum())

    lo, hi = 1, kg.num_entities
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        _, c = removed_count(mid)
        if c >= target:
            best = mid
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:
        raise SplitInfeasible("cannot reach target evaluation size")
    candidates = [best] if best == 1 else [best - 1, best]
    sizes = {u: removed_count(u) for u in candidates}
    u = min(candidates, key=lambda x: (abs(sizes[x][1] - target), x))
    mask, count = sizes[u]
    if abs(count - target) > tolerance * target:
        raise SplitInfeasible(
            f"closest reachable evaluation size {count} misses target {target} "
            f"by more than {tolerance:.0%}")

    removed = np.flatnonzero(mask)
    n_valid = math.floor(count * (valid_frac / (valid_frac + test_frac)))
    valid_idx, test_idx = _split_removed(removed, n_valid, rng)
    return Split(train=kg.triples[~mask], valid=kg.triples[valid_idx],
                 test=kg.triples[test_idx], mode="inductive", seed=int(seed),
                 valid_frac=float(valid_frac), test_frac=float(test_frac))


class Query(NamedTuple):
    index: int
    partition: str  # valid | test
    side: str       # head | tail
    triple: Triple


@dataclass
class NegativeSets:
    queries: List[Query]
    negatives: List[np.ndarray]
    m_eval: int
    seed: int
    shortfalls: dict = field(default_factory=dict)

    @property
    def n_queries(self):
        return len(self.queries)

    def empty_pool_indices(self):
        return [q.index for q, negs in zip(self.queries, self.negatives) if negs.shape[0] == 0]

    def indices_for(self, partition=None):
        return [q.index for q in self.queries
                if partition is None or q.partition == partition]


def iter_eval_queries(split: Split):
    """Deterministic query order: valid triples then test triples, each
    contributing a head-side then a tail-side query."""
    idx = 0
    for partition, triples in (("valid", split.valid), ("test", split.test)):
        for h, r, t in triples:
            for side in ("head", "tail"):
                yield Query(idx, partition, side, Triple(int(h), int(r), int(t)))
                idx += 1


def generate_negatives(kg: KnowledgeGraph, split: Split, m_eval, seed) -> NegativeSets:
    """Fixed filtered candidate sets for every evaluation query.

    Candidates share the replaced entity's type, never form a positive in
    train/valid/test, and exclude the true entity. Pools smaller than m_eval
    are kept whole and recorded as shortfalls; empty pools flag the query for
    exclusion from metrics.
    """
    all_triples = np.concatenate([split.train, split.valid, split.test], axis=0)
    heads_by_rt = {}
    tails_by_hr = {}
    for h, r, t in all_triples:
        heads_by_rt.setdefault((int(r), int(t)), set()).add(int(h))
        tails_by_hr.setdefault((int(h), int(r)), set()).add(int(t))

    queries = []
    negatives = []
    shortfalls = {}
    for q in iter_eval_queries(split):
        h, r, t = q.triple
        if q.side == "head":
            replaced, positives = h, heads_by_rt.get((r, t), set())
        else:
            replaced, positives = t, tails_by_hr.get((h, r), set())
        same_type = kg.type_to_entities[kg.entity_types[replaced]]
        pool = np.array([int(e) for e in same_type
                         if int(e) != replaced and int(e) not in positives], dtype=np.int64)
        rng = np.random.default_rng([seed, q.index])
        k = min(m_eval, pool.shape[0])
        drawn = pool[rng.permutation(pool.shape[0])[:k]] if k else np.empty(0, dtype=np.int64)
        if k < m_eval:
            shortfalls[q.index] = int(k)
        queries.append(q)
        negatives.append(drawn)
    return NegativeSets(queries=queries, negatives=negatives, m_eval=int(m_eval),
                        seed=int(seed), shortfalls=shortfalls)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_split(split: Split, kg: KnowledgeGraph, out_dir, dataset_info=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, triples in (("train", split.train), ("valid", split.valid), ("test", split.test)):
        path = out / f"{name}.tsv"
        write_triples_tsv(path, kg, triples)
        files[f"{name}.tsv"] = sha256_file(path)
    manifest = {
        "kind": "split",
        "mode": split.mode,
        "seed": split.seed,
        "valid_frac": split.valid_frac,
        "test_frac": split.test_frac,
        "counts": split.counts(),
        "files": files,
    }
    if dataset_info:
        manifest["dataset"] = dataset_info
    dump_json(manifest, out / "manifest.json")
    return out / "manifest.json"


def load_split(split_dir, kg: KnowledgeGraph, verify=True) -> Split:
    split_dir = Path(split_dir)
    manifest = load_json(split_dir / "manifest.json")
    parts = {}
    for name in ("train", "valid", "test"):
        path = split_dir / f"{name}.tsv"
        if verify:
            check_hash(path, manifest["files"][f"{name}.tsv"], "split file")
        rows = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                hk, rl, tk = line.split("\t")
                rows.append((kg.key_to_id[hk], kg.relation_to_id[rl], kg.key_to_id[tk]))
        parts[name] = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    return Split(train=parts["train"], valid=parts["valid"], test=parts["test"],
                 mode=manifest["mode"], seed=manifest["seed"],
                 valid_frac=manifest["valid_frac"], test_frac=manifest["test_frac"])


def save_negatives(neg: NegativeSets, kg: KnowledgeGraph, out_dir, split_manifest_path):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    neg_path = out / "negatives.tsv"
    with open(neg_path, "w", encoding="utf-8") as f:
        for q, cands in zip(neg.queries, neg.negatives):
            for e in cands:
                f.write(f"{q.index}\t{q.side}\t{kg.entities[int(e)].key}\n")
    q_path = out / "queries.tsv"
    with open(q_path, "w", encoding="utf-8") as f:
        for q in neg.queries:
            h, r, t = q.triple
            f.write(f"{q.index}\t{q.partition}\t{q.side}\t{kg.entities[h].key}"
                    f"\t{kg.relations[r]}\t{kg.entities[t].key}\n")
    manifest = {
        "kind": "negatives",
        "m_eval": neg.m_eval,
        "seed": neg.seed,
        "n_queries": neg.n_queries,
        "shortfalls": {str(k): v for k, v in sorted(neg.shortfalls.items())},
        "empty_pool_count": len(neg.empty_pool_indices()),
        "split_manifest": sha256_file(split_manifest_path),
        "files": {"negatives.tsv": sha256_file(neg_path), "queries.tsv": sha256_file(q_path)},
    }
    dump_json(manifest, out / "manifest.json")
    return out / "manifest.json"


def load_negatives(neg_dir, kg: KnowledgeGraph, verify=True) -> NegativeSets:
    neg_dir = Path(neg_dir)
    manifest = load_json(neg_dir / "manifest.json")
    if verify:
        check_hash(neg_dir / "negatives.tsv", manifest["files"]["negatives.tsv"], "negatives file")
        check_hash(neg_dir / "queries.tsv", manifest["files"]["queries.tsv"], "queries file")
    queries = []
    with open(neg_dir / "queries.tsv", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            idx, partition, side, hk, rl, tk = line.split("\t")
            queries.append(Query(int(idx), partition, side,
                                 Triple(kg.key_to_id[hk], kg.relation_to_id[rl], kg.key_to_id[tk])))
    negatives = [[] for _ in queries]
    with open(neg_dir / "negatives.tsv", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            idx, side, key = line.split("\t")
            negatives[int(idx)].append(kg.key_to_id[key])
    negatives = [np.asarray(c, dtype=np.int64) for c in negatives]
    shortfalls = {int(k): v for k, v in manifest.get("shortfalls", {}).items()}
    return NegativeSets(queries=queries, negatives=negatives,
                        m_eval=manifest["m_eval"], seed=manifest["seed"],
                        shortfalls=shortfalls)
