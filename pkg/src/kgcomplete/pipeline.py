"""End-to-end orchestration: split, negatives, embedding training, scoring,
features, integrator fitting, integration, and evaluation, with each stage
bound to its inputs by content hashes so repeat runs skip finished work."""

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import HashMismatch, KgcError, StageFailure
from .evaluate import (compute_metrics, compare_models, description_breakdown,
                       format_metrics_table, per_relation_breakdown, ranks_for)
from .features import FeatureExtractor, Vocab, load_features, load_vocab, save_features
from .graph import KnowledgeGraph, load_graph
from .kge import KgeConfig, load_kge, save_kge, score_queries, train_kge
from .manifests import (check_hash, dump_json, load_json, sha256_file, ensure_dir)
from .scores import ScoreSet, load_scores, save_scores
from .splits import (generate_negatives, load_negatives, load_split,
                     make_inductive_split, make_transductive_split,
                     save_negatives, save_split)
from .ensemble import (ALL_SAME, GlobalWeights, fit_global_average, integrate,
                       label_router_targets, load_router, load_weighter,
                       save_router, save_weighter, train_router, train_weighter)

CONFIG_SCHEMA_VERSION = "v1"

OUTPUT_ROOT_ENV = "KGC_OUTPUT_ROOT"


def resolve_out(path) -> Path:
    """Relative output paths land under $KGC_OUTPUT_ROOT when it is set."""
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


@dataclass
class RunConfig:
    data: dict
    base_dir: Path

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        cfg = cls(data=load_json(path), base_dir=path.parent)
        cfg.validate()
        return cfg

    def save(self, path):
        dump_json(self.data, path)

    def path(self, key: str) -> Optional[Path]:
        value = self.data.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self):
        version = self.data.get("schema_version")
        if version != CONFIG_SCHEMA_VERSION:
            raise ValueError(f"config schema_version {version!r}, "
                             f"expected {CONFIG_SCHEMA_VERSION!r}")
        for key in ("metadata", "triples"):
            p = self.path(key)
            if p is None or not p.exists():
                raise FileNotFoundError(f"config {key} file not found: {p}")
        if self.data.get("vocab") and not self.path("vocab").exists():
            raise FileNotFoundError(f"config vocab file not found: {self.path('vocab')}")
        if "output_dir" not in self.data:
            raise ValueError("config needs an output_dir")
        names = [m.get("name", m["model_kind"].lower()) for m in self.data["models"]]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate model names in config: {names}")

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    def model_entries(self):
        out = []
        for entry in self.data["models"]:
            entry = dict(entry)
            name = entry.pop("name", entry["model_kind"].lower())
            entry.setdefault("seed", self.seed)
            out.append((name, KgeConfig(**entry)))
        return out


def stage_fresh(stage_dir: Path, inputs: dict) -> bool:
    """True when the stage's manifest records exactly these inputs and every
    listed output file still matches its recorded hash. Bytes that changed
    under an unchanged manifest raise HashMismatch; missing files or changed
    inputs just mean a re-run."""
    manifest_path = Path(stage_dir) / "manifest.json"
    if not manifest_path.exists():
        return False
    manifest = load_json(manifest_path)
    recorded = manifest.get("inputs")
    if json.loads(json.dumps(recorded)) != json.loads(json.dumps(inputs)):
        return False
    for name, digest in manifest.get("files", {}).items():
        fpath = Path(stage_dir) / name
        if not fpath.exists():
            return False
        check_hash(fpath, digest, f"stage output {name}")
    return True


def record_inputs(manifest_path, inputs: dict):
    manifest_path = Path(manifest_path)
    manifest = load_json(manifest_path)
    manifest["inputs"] = inputs
    dump_json(manifest, manifest_path)


class Pipeline:
    def __init__(self, config: RunConfig, log=None):
        self.config = config
        self.out_root = resolve_out(config.data["output_dir"])
        if not self.out_root.is_absolute():
            self.out_root = config.base_dir / self.out_root
        self.log = log or (lambda line: None)
        self.statuses: List[dict] = []

    def _event(self, stage: str, status: str, path):
        event = {"stage": stage, "status": status, "path": str(path)}
        self.statuses.append(event)
        self.log(json.dumps(event, sort_keys=True))

    # ------------------------------------------------------------------
    # stages
    # ------------------------------------------------------------------

    def _load_kg(self) -> KnowledgeGraph:
        return load_graph(self.config.path("triples"), self.config.path("metadata"))

    def _dataset_info(self):
        return {
            "metadata": str(self.config.path("metadata").resolve()),
            "triples": str(self.config.path("triples").resolve()),
            "metadata_sha256": sha256_file(self.config.path("metadata")),
            "triples_sha256": sha256_file(self.config.path("triples")),
        }

    def _stage_split(self, kg: KnowledgeGraph) -> Path:
        stage_dir = self.out_root / "split"
        params = dict(self.config.data.get("split", {}))
        params.setdefault("mode", "transductive")
        params.setdefault("valid_frac", 0.1)
        params.setdefault("test_frac", 0.1)
        inputs = {
            "metadata": sha256_file(self.config.path("metadata")),
            "triples": sha256_file(self.config.path("triples")),
            "params": params,
            "seed": self.config.seed,
        }
        if stage_fresh(stage_dir, inputs):
            self._event("split", "skip", stage_dir)
            return stage_dir
        if params["mode"] == "transductive":
            split = make_transductive_split(kg, params["valid_frac"],
                                            params["test_frac"], self.config.seed)
        elif params["mode"] == "inductive":
            split = make_inductive_split(kg, params["valid_frac"],
                                         params["test_frac"], self.config.seed,
                                         tolerance=params.get("tolerance", 0.01))
        else:
            raise ValueError(f"unknown split mode {params['mode']!r}")
        manifest_path = save_split(split, kg, stage_dir,
                                   dataset_info=self._dataset_info())
        record_inputs(manifest_path, inputs)
        self._event("split", "run", stage_dir)
        return stage_dir

    def _stage_negatives(self, kg, split_dir: Path) -> Path:
        stage_dir = self.out_root / "negatives"
        params = dict(self.config.data.get("negatives", {}))
        m_eval = int(params.get("m_eval", 500))
        inputs = {
            "split": sha256_file(split_dir / "manifest.json"),
            "m_eval": m_eval,
            "seed": self.config.seed,
        }
        if stage_fresh(stage_dir, inputs):
            self._event("negatives", "skip", stage_dir)
            return stage_dir
        split = load_split(split_dir, kg)
        negatives = generate_negatives(kg, split, m_eval, self.config.seed)
        manifest_path = save_negatives(negatives, kg, stage_dir,
                                       split_dir / "manifest.json")
        record_inputs(manifest_path, inputs)
        self._event("negatives", "run", stage_dir)
        return stage_dir

    def _stage_train(self, kg, split_dir, neg_dir, name: str,
                     kge_config: KgeConfig) -> Path:
        stage_dir = self.out_root / "kge" / name
        inputs = {
            "split": sha256_file(split_dir / "manifest.json"),
            "negatives": sha256_file(neg_dir / "manifest.json"),
            "config": asdict(kge_config),
        }
        if stage_fresh(stage_dir, inputs):
            self._event(f"train-kge[{name}]", "skip", stage_dir)
            return stage_dir
        split = load_split(split_dir, kg)
        negatives = load_negatives(neg_dir, kg)
        kg_train = kg.with_triples(split.train)
        model = train_kge(kg_train, negatives, kge_config)
        manifest_path = save_kge(stage_dir, model)
        record_inputs(manifest_path, inputs)
        self._event(f"train-kge[{name}]", "run", stage_dir)
        return stage_dir

    def _stage_score(self, kg, neg_dir, model_dir, name: str) -> Path:
        stage_dir = self.out_root / "scores" / name
        inputs = {
            "model": sha256_file(model_dir / "manifest.json"),
            "negatives": sha256_file(neg_dir / "manifest.json"),
        }
        if stage_fresh(stage_dir, inputs):
            self._event(f"score[{name}]", "skip", stage_dir)
            return stage_dir
        negatives = load_negatives(neg_dir, kg)
        model = load_kge(model_dir)
        scored = score_queries(model, negatives, model_name=name)
        manifest_path = save_scores(scored, stage_dir,
                                    negatives_manifest_path=neg_dir / "manifest.json")
        record_inputs(manifest_path, inputs)
        self._event(f"score[{name}]", "run", stage_dir)
        return stage_dir

    def _stage_features(self, kg, split_dir, neg_dir,
                        score_dirs: Dict[str, Path]) -> Path:
        stage_dir = self.out_root / "features"
        vocab_path = self.config.path("vocab")
        inputs = {
            "split": sha256_file(split_dir / "manifest.json"),
            "negatives": sha256_file(neg_dir / "manifest.json"),
            "scores": {name: sha256_file(d / "manifest.json")
                       for name, d in score_dirs.items()},
            "vocab": sha256_file(vocab_path) if vocab_path else None,
        }
        if stage_fresh(stage_dir, inputs):
            self._event("features", "skip", stage_dir)
            return stage_dir
        split = load_split(split_dir, kg)
        negatives = load_negatives(neg_dir, kg)
        names = list(score_dirs.keys())
        pos_scores = []
        for name in names:
            pos_scores.append(load_scores(score_dirs[name]).pos)
        vocab = Vocab(load_vocab(vocab_path)) if vocab_path else None
        extractor = FeatureExtractor(kg.with_triples(split.train), names,
                                     vocab=vocab)
        matrix = extractor.featurize_queries(negatives.queries, pos_scores)
        manifest_path = save_features(stage_dir, matrix, extractor.schema, names)
        record_inputs(manifest_path, inputs)
        self._event("features", "run", stage_dir)
        return stage_dir

    def _integration(self) -> dict:
        params = dict(self.config.data.get("integration", {}))
        params.setdefault("method", "global-average")
        return params

    def _load_score_sets(self, kg, neg_dir, score_dirs) -> List[ScoreSet]:
        return [load_scores(d) for d in score_dirs.values()]

    def _stage_integrator(self, kg, neg_dir, feat_dir,
                          score_dirs: Dict[str, Path]) -> Path:
        stage_dir = self.out_root / "integrator"
        params = self._integration()
        method = params["method"]
        inputs = {
            "negatives": sha256_file(neg_dir / "manifest.json"),
            "features": sha256_file(feat_dir / "manifest.json"),
            "scores": {name: sha256_file(d / "manifest.json")
                       for name, d in score_dirs.items()},
            "params": params,
            "seed": self.config.seed,
        }
        if stage_fresh(stage_dir, inputs):
            self._event("fit-integrator", "skip", stage_dir)
            return stage_dir
        negatives = load_negatives(neg_dir, kg)
        score_sets = self._load_score_sets(kg, neg_dir, score_dirs)
        names = [s.model_name for s in score_sets]
        ensure_dir(stage_dir)
        if method == "global-average":
            weights = fit_global_average(score_sets, negatives, partition="valid")
            dump_json({
                "kind": "global-weights",
                "model_names": weights.model_names,
                "alpha": [float(a) for a in weights.alpha],
                "valid_mrr": weights.valid_mrr,
                "files": {},
            }, stage_dir / "manifest.json")
        elif method in ("router", "weighted-average"):
            matrix, schema, _ = load_features(feat_dir)
            valid_idx = negatives.indices_for("valid")
            if method == "router":
                rank_maps = [dict(ranks_for(s, negatives, partition="valid"))
                             for s in score_sets]
                usable = [q for q in valid_idx
                          if all(q in m for m in rank_maps)]
                ranks = np.array([[m[q] for m in rank_maps] for q in usable],
                                 dtype=np.int64)
                labels = label_router_targets(ranks)
                router = train_router(
                    matrix[usable], labels, params.get("router_kind", "gbdt"),
                    hyper_grid=params.get("hyper_grid"), seed=self.config.seed,
                    class_names=names + [ALL_SAME],
                    feature_names=schema.names)
                valid_mrrs = [compute_metrics(s, negatives, partition="valid").mrr
                              for s in score_sets]
                router.allsame_model = names[int(np.argmax(valid_mrrs))]
                save_router(stage_dir, router)
            else:
                weighter = train_weighter(
                    matrix[valid_idx], score_sets, negatives,
                    margin=float(params.get("margin", 1.0)),
                    hyper_grid=params.get("hyper_grid"), seed=self.config.seed)
                save_weighter(stage_dir, weighter)
        else:
            raise ValueError(f"unknown integration method {method!r}")
        record_inputs(stage_dir / "manifest.json", inputs)
        self._event("fit-integrator", "run", stage_dir)
        return stage_dir

    def _stage_integrate(self, kg, neg_dir, feat_dir, integ_dir,
                         score_dirs: Dict[str, Path]) -> Path:
        stage_dir = self.out_root / "integrated"
        params = self._integration()
        method = params["method"]
        inputs = {
            "integrator": sha256_file(integ_dir / "manifest.json"),
            "features": sha256_file(feat_dir / "manifest.json"),
            "scores": {name: sha256_file(d / "manifest.json")
                       for name, d in score_dirs.items()},
            "method": method,
        }
        if stage_fresh(stage_dir, inputs):
            self._event("integrate", "skip", stage_dir)
            return stage_dir
        negatives = load_negatives(neg_dir, kg)
        score_sets = self._load_score_sets(kg, neg_dir, score_dirs)
        if method == "global-average":
            m = load_json(integ_dir / "manifest.json")
            integrator = GlobalWeights(alpha=np.array(m["alpha"]),
                                       model_names=m["model_names"],
                                       valid_mrr=m["valid_mrr"])
            combined = integrate(method, integrator, score_sets)
        else:
            matrix, _, _ = load_features(feat_dir)
            integrator = (load_router(integ_dir) if method == "router"
                          else load_weighter(integ_dir))
            combined = integrate(method, integrator, score_sets, features=matrix)
        combined.model_name = f"integrated-{method}"
        combined.sides = [q.side for q in negatives.queries]
        manifest_path = save_scores(combined, stage_dir,
                                    negatives_manifest_path=neg_dir / "manifest.json")
        record_inputs(manifest_path, inputs)
        self._event("integrate", "run", stage_dir)
        return stage_dir

    def _stage_evaluate(self, kg, split_dir, neg_dir,
                        score_dirs: Dict[str, Path], integrated_dir: Path) -> Path:
        stage_dir = self.out_root / "evaluate"
        all_dirs = dict(score_dirs)
        all_dirs["integrated"] = integrated_dir
        inputs = {
            "split": sha256_file(split_dir / "manifest.json"),
            "negatives": sha256_file(neg_dir / "manifest.json"),
            "scores": {name: sha256_file(d / "manifest.json")
                       for name, d in all_dirs.items()},
        }
        if stage_fresh(stage_dir, inputs):
            self._event("evaluate", "skip", stage_dir)
            return stage_dir
        negatives = load_negatives(neg_dir, kg)
        ensure_dir(stage_dir)
        loaded = []
        for name, d in all_dirs.items():
            loaded.append((name, load_scores(d)))
        report = {
            "kind": "evaluation-report",
            "empty_pool_queries": len(negatives.empty_pool_indices()),
            "partitions": {},
            "per_relation": {},
            "description_breakdown": {},
            "comparisons": {},
        }
        for partition in ("valid", "test"):
            report["partitions"][partition] = {
                name: compute_metrics(s, negatives, partition=partition).as_dict()
                for name, s in loaded}
        for name, s in loaded:
            report["per_relation"][name] = {
                rel: m.as_dict() for rel, m in
                per_relation_breakdown(s, negatives, kg=kg, partition="test").items()}
            report["description_breakdown"][name] = {
                bucket: m.as_dict() for bucket, m in
                description_breakdown(s, negatives, kg, partition="test").items()}
        for i in range(len(loaded)):
            for j in range(i + 1, len(loaded)):
                a_name, a = loaded[i]
                b_name, b = loaded[j]
                fa, fb, tie = compare_models(a, b, negatives, partition="test")
                report["comparisons"][f"{a_name} vs {b_name}"] = {
                    "first_better": fa, "second_better": fb, "tie": tie}
        ranks_path = stage_dir / "ranks.tsv"
        with open(ranks_path, "w", encoding="utf-8") as f:
            for name, s in loaded:
                for q, rank in ranks_for(s, negatives):
                    f.write(f"{q}\t{name}\t{rank}\n")
        report_path = stage_dir / "report.json"
        dump_json(report, report_path)
        lines = []
        for partition in ("valid", "test"):
            rows = [(name, compute_metrics(s, negatives, partition=partition))
                    for name, s in loaded]
            lines.append(format_metrics_table(rows, title=f"partition: {partition}"))
        text_path = stage_dir / "report.txt"
        with open(text_path, "w", encoding="utf-8") as f:
            f.write("\n\n".join(lines) + "\n")
        manifest = {
            "kind": "evaluation",
            "files": {
                "report.json": sha256_file(report_path),
                "report.txt": sha256_file(text_path),
                "ranks.tsv": sha256_file(ranks_path),
            },
            "inputs": inputs,
        }
        dump_json(manifest, stage_dir / "manifest.json")
        self._event("evaluate", "run", stage_dir)
        return stage_dir

    def run(self) -> Path:
        stage = "load"
        try:
            ensure_dir(self.out_root)
            copy = dict(self.config.data)
            for key in ("metadata", "triples", "vocab"):
                p = self.config.path(key)
                if p is not None:
                    copy[key] = str(p.resolve())
            dump_json(copy, self.out_root / "config.json")
            kg = self._load_kg()
            stage = "split"
            split_dir = self._stage_split(kg)
            stage = "negatives"
            neg_dir = self._stage_negatives(kg, split_dir)
            score_dirs = {}
            for name, kge_config in self.config.model_entries():
                stage = f"train-kge[{name}]"
                model_dir = self._stage_train(kg, split_dir, neg_dir, name, kge_config)
                stage = f"score[{name}]"
                score_dirs[name] = self._stage_score(kg, neg_dir, model_dir, name)
            stage = "features"
            feat_dir = self._stage_features(kg, split_dir, neg_dir, score_dirs)
            stage = "fit-integrator"
            integ_dir = self._stage_integrator(kg, neg_dir, feat_dir, score_dirs)
            stage = "integrate"
            integrated_dir = self._stage_integrate(kg, neg_dir, feat_dir,
                                                   integ_dir, score_dirs)
            stage = "evaluate"
            eval_dir = self._stage_evaluate(kg, split_dir, neg_dir, score_dirs,
                                            integrated_dir)
            return eval_dir / "report.json"
        except HashMismatch:
            raise
        except KgcError as e:
            raise StageFailure(f"stage {stage} failed: {e}") from e


def run_pipeline(config: RunConfig, log=None) -> Path:
    return Pipeline(config, log=log).run()


# ---------------------------------------------------------------------------
# artifact validation
# ---------------------------------------------------------------------------


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def validate_artifacts(out_root) -> List[dict]:
    """Re-check, against the artifacts alone, the invariants the stages are
    supposed to have enforced. Returns one pass/fail record per check."""
    out_root = Path(out_root)
    checks: List[dict] = []
    config = RunConfig.load(out_root / "config.json")
    split_manifest = load_json(out_root / "split" / "manifest.json")
    dataset = split_manifest["dataset"]
    try:
        check_hash(dataset["metadata"], dataset["metadata_sha256"], "metadata")
        check_hash(dataset["triples"], dataset["triples_sha256"], "triples")
        checks.append(_check("dataset-hashes", True, "metadata and triples match"))
    except HashMismatch as e:
        checks.append(_check("dataset-hashes", False, str(e)))
        return checks
    kg = load_graph(dataset["triples"], dataset["metadata"])
    split = load_split(out_root / "split", kg)
    negatives = load_negatives(out_root / "negatives", kg)

    all_positives = set()
    for part in (split.train, split.valid, split.test):
        for h, r, t in part:
            all_positives.add((int(h), int(r), int(t)))
    bad_type = 0
    bad_positive = 0
    bad_self = 0
    for q in negatives.queries:
        replaced = q.triple.head if q.side == "head" else q.triple.tail
        want = kg.entity_types[replaced]
        for e in negatives.negatives[q.index]:
            e = int(e)
            if kg.entity_types[e] != want:
                bad_type += 1
            if e == replaced:
                bad_self += 1
            cand = ((e, q.triple.rel, q.triple.tail) if q.side == "head"
                    else (q.triple.head, q.triple.rel, e))
            if cand in all_positives:
                bad_positive += 1
    checks.append(_check(
        "negative-type-preservation", bad_type == 0,
        f"{bad_type} negatives with a mismatched entity type"))
    checks.append(_check(
        "negative-excludes-positives", bad_positive == 0 and bad_self == 0,
        f"{bad_positive} known positives and {bad_self} true entities "
        f"appear among negatives"))

    integ_dir = out_root / "integrator"
    method = config.data.get("integration", {}).get("method", "global-average")
    if integ_dir.exists():
        if method == "global-average":
            m = load_json(integ_dir / "manifest.json")
            alpha = np.array(m["alpha"])
            ok = bool(np.all(alpha >= 0) and abs(alpha.sum() - 1.0) <= 1e-6)
            checks.append(_check("simplex-weights", ok,
                                 f"alpha={m['alpha']}, sum={alpha.sum():.9f}"))
        else:
            matrix, _, _ = load_features(out_root / "features")
            sample = matrix[: min(64, matrix.shape[0])]
            if method == "router":
                model = load_router(integ_dir)
                proba = model.predict_proba(sample)
            else:
                model = load_weighter(integ_dir)
                proba = model.predict_alpha(sample)
            sums = proba.sum(axis=1)
            ok = bool(np.all(proba >= -1e-9)
                      and np.max(np.abs(sums - 1.0)) <= 1e-6)
            checks.append(_check(
                "simplex-weights", ok,
                f"max |row sum - 1| = {float(np.max(np.abs(sums - 1.0))):.3g}"))

    eval_dir = out_root / "evaluate"
    if eval_dir.exists():
        stored = {}
        with open(eval_dir / "ranks.tsv", encoding="utf-8") as f:
            for line in f:
                q, name, rank = line.rstrip("\n").split("\t")
                stored[(int(q), name)] = int(rank)
        names = sorted({name for _, name in stored})
        non_empty = [q.index for q in negatives.queries
                     if negatives.negatives[q.index].shape[0] > 0]
        rng = np.random.default_rng([negatives.seed, 99])
        n_sample = min(len(non_empty), max(10, len(non_empty) // 100))
        sample = rng.choice(np.array(non_empty), size=n_sample, replace=False)
        mismatches = 0
        for name in names:
            d = (out_root / "integrated" if name == "integrated"
                 else out_root / "scores" / name)
            scored = load_scores(d)
            for q in sample:
                q = int(q)
                neg = scored.negs[q]
                rank = 1 + int(np.sum(neg > scored.pos[q])) + \
                    int(np.sum(neg == scored.pos[q]))
                if stored.get((q, name)) != rank:
                    mismatches += 1
        checks.append(_check(
            "rank-recomputation", mismatches == 0,
            f"{mismatches} mismatches over {len(sample)} sampled queries "
            f"x {len(names)} models"))
    return checks
