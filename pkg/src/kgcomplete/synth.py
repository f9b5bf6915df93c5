"""Small seeded synthetic knowledge graph for demos and smoke tests.

Three entity types (compound, disease, gene), three typed relations
(treats: compound->disease, targets: compound->gene, associates:
gene->disease), planted so that link structure is learnable: entities are
assigned to latent clusters and edges mostly stay within a cluster.
Some names contain the literal token "unknown" and a third of the
descriptions are missing, so text features have variation to work with.
"""

from pathlib import Path

import numpy as np

from .manifests import dump_json, ensure_dir

_WORDS = ["alpha", "beta", "gamma", "delta", "kappa", "sigma", "omega",
          "zeta", "theta", "lambda"]


def _name(kind: str, i: int, rng) -> str:
    if rng.random() < 0.1:
        return f"unknown {kind} {i}"
    w = _WORDS[int(rng.integers(0, len(_WORDS)))]
    if rng.random() < 0.25:
        return f"{kind[:4].upper()}-{w}{i}"
    return f"{w} {kind} {i}"


def _description(kind: str, name: str, cluster: int, rng) -> str:
    if rng.random() < 1 / 3:
        return ""
    w1 = _WORDS[int(rng.integers(0, len(_WORDS)))]
    w2 = _WORDS[int(rng.integers(0, len(_WORDS)))]
    return f"A {kind} in group {cluster}, related to {w1} and {w2}; see {name}."


def make_synthetic_kg(out_dir, n_triples: int = 200, seed: int = 0,
                      n_clusters: int = 3):
    """Writes metadata.tsv, triples.tsv, and vocab.txt; returns their paths."""
    rng = np.random.default_rng([seed, 7])
    out = ensure_dir(out_dir)
    counts = {"compound": 30, "disease": 25, "gene": 25}
    keys = {}
    metadata = []
    clusters = {}
    for kind, n in counts.items():
        keys[kind] = []
        for i in range(n):
            key = f"{kind[0].upper()}{i:03d}"
            keys[kind].append(key)
            cluster = int(rng.integers(0, n_clusters))
            clusters[key] = cluster
            name = _name(kind, i, rng)
            metadata.append((key, kind, name, _description(kind, name, cluster, rng)))

    relations = [("treats", "compound", "disease"),
                 ("targets", "compound", "gene"),
                 ("associates", "gene", "disease")]
    triples = set()
    guard = 0
    while len(triples) < n_triples and guard < n_triples * 200:
        guard += 1
        rel, head_kind, tail_kind = relations[int(rng.integers(0, len(relations)))]
        h = keys[head_kind][int(rng.integers(0, counts[head_kind]))]
        if rng.random() < 0.9:
            pool = [k for k in keys[tail_kind] if clusters[k] == clusters[h]]
        else:
            pool = keys[tail_kind]
        if not pool:
            continue
        t = pool[int(rng.integers(0, len(pool)))]
        triples.add((h, rel, t))

    meta_path = out / "metadata.tsv"
    with open(meta_path, "w", encoding="utf-8") as f:
        for row in metadata:
            f.write("\t".join(row) + "\n")
    triples_path = out / "triples.tsv"
    with open(triples_path, "w", encoding="utf-8") as f:
        for h, r, t in sorted(triples):
            f.write(f"{h}\t{r}\t{t}\n")
    vocab_path = out / "vocab.txt"
    subwords = sorted(set(_WORDS + ["un", "known", "group", "compound",
                                    "disease", "gene", "related", "see"]))
    with open(vocab_path, "w", encoding="utf-8") as f:
        f.write("\n".join(subwords) + "\n")
    return meta_path, triples_path, vocab_path


def write_default_config(out_dir, metadata_path, triples_path,
                         vocab_path=None, seed: int = 0,
                         method: str = "global-average") -> Path:
    """A runnable starter config next to the dataset, sized for a quick run."""
    out = ensure_dir(out_dir)
    config = {
        "schema_version": "v1",
        "seed": seed,
        "metadata": str(Path(metadata_path).resolve()),
        "triples": str(Path(triples_path).resolve()),
        "output_dir": "run",
        "split": {"mode": "transductive", "valid_frac": 0.1, "test_frac": 0.1},
        "negatives": {"m_eval": 50},
        "models": [
            {"name": "transe", "model_kind": "TransE", "dim": 16,
             "lr": 0.01, "negatives": 16, "batch_size": 64,
             "max_steps": 200, "eval_every": 100},
            {"name": "distmult", "model_kind": "DistMult", "dim": 16,
             "lr": 0.01, "negatives": 16, "batch_size": 64,
             "max_steps": 200, "eval_every": 100},
        ],
        "integration": {"method": method},
    }
    if vocab_path is not None:
        config["vocab"] = str(Path(vocab_path).resolve())
    path = out / "config.json"
    dump_json(config, path)
    return path
