"""Command-line entry point.

Heavy modules are imported inside each handler so --deterministic can pin
every BLAS and JIT thread pool to one thread before numpy first loads.
"""

import argparse
import os
import sys

THREAD_ENV_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                   "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS",
                   "NUMBA_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")


def force_single_thread():
    for var in THREAD_ENV_VARS:
        os.environ[var] = "1"


def _resolve(path):
    from .pipeline import resolve_out
    return resolve_out(path)


def _load_kg(args):
    from .graph import load_graph
    return load_graph(args.triples, args.metadata)


def _add_dataset_args(p):
    p.add_argument("--metadata", required=True, help="entity metadata TSV")
    p.add_argument("--triples", required=True, help="triples TSV")


def _parse_score_dirs(items):
    """Accept NAME=DIR or bare DIR (name then comes from the manifest)."""
    out = []
    for item in items:
        if "=" in item:
            name, d = item.split("=", 1)
            out.append((name, d))
        else:
            out.append((None, item))
    return out


def _load_score_sets(items, kg=None):
    from .scores import load_scores
    sets = []
    for name, d in _parse_score_dirs(items):
        s = load_scores(d)
        if name:
            s.model_name = name
        sets.append(s)
    return sets


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------


def cmd_synth(args):
    from .synth import make_synthetic_kg, write_default_config
    out = _resolve(args.out)
    meta, triples, vocab = make_synthetic_kg(out, n_triples=args.n_triples,
                                             seed=args.seed)
    config = write_default_config(out, meta, triples, vocab_path=vocab,
                                  seed=args.seed)
    print(f"dataset: {out}")
    print(f"config: {config}")
    return 0


def cmd_split(args):
    from .splits import make_inductive_split, make_transductive_split, save_split
    from .manifests import sha256_file
    kg = _load_kg(args)
    if args.mode == "transductive":
        split = make_transductive_split(kg, args.valid_frac, args.test_frac,
                                        args.seed)
    else:
        split = make_inductive_split(kg, args.valid_frac, args.test_frac,
                                     args.seed, tolerance=args.tolerance)
    info = {
        "metadata": str(os.path.abspath(args.metadata)),
        "triples": str(os.path.abspath(args.triples)),
        "metadata_sha256": sha256_file(args.metadata),
        "triples_sha256": sha256_file(args.triples),
    }
    manifest = save_split(split, kg, _resolve(args.out), dataset_info=info)
    print(f"split: {manifest}")
    return 0


def cmd_negatives(args):
    from .splits import generate_negatives, load_split, save_negatives
    kg = _load_kg(args)
    split_dir = _resolve(args.split)
    split = load_split(split_dir, kg)
    neg = generate_negatives(kg, split, args.m_eval, args.seed)
    manifest = save_negatives(neg, kg, _resolve(args.out),
                              split_dir / "manifest.json")
    print(f"negatives: {manifest}")
    return 0


def cmd_train_kge(args):
    from .kge import KgeConfig, save_kge, train_kge
    from .splits import load_negatives, load_split
    kg = _load_kg(args)
    split = load_split(_resolve(args.split), kg)
    config = KgeConfig(model_kind=args.model, dim=args.dim, margin=args.margin,
                       lr=args.lr, negatives=args.negatives, l3_coeff=args.l3,
                       batch_size=args.batch_size, max_steps=args.steps,
                       eval_every=args.eval_every, seed=args.seed)
    valid_neg = None
    if args.negatives_dir:
        valid_neg = load_negatives(_resolve(args.negatives_dir), kg)
    model = train_kge(kg.with_triples(split.train), valid_neg, config)
    manifest = save_kge(_resolve(args.out), model)
    print(f"model: {manifest} (best valid MRR {model.best_valid_mrr})")
    return 0


def cmd_score(args):
    from .kge import load_kge, score_queries
    from .scores import save_scores
    from .splits import load_negatives
    kg = _load_kg(args)
    neg_dir = _resolve(args.negatives_dir)
    negatives = load_negatives(neg_dir, kg)
    model = load_kge(_resolve(args.model_dir))
    name = args.name or model.config.model_kind.lower()
    scored = score_queries(model, negatives, model_name=name)
    manifest = save_scores(scored, _resolve(args.out),
                           negatives_manifest_path=neg_dir / "manifest.json")
    print(f"scores: {manifest}")
    return 0


def cmd_features(args):
    from .features import FeatureExtractor, Vocab, load_vocab, save_features
    from .scores import load_scores
    from .splits import load_negatives, load_split
    kg = _load_kg(args)
    split = load_split(_resolve(args.split), kg)
    negatives = load_negatives(_resolve(args.negatives_dir), kg)
    names, pos_scores = [], []
    for name, d in _parse_score_dirs(args.scores):
        s = load_scores(_resolve(d))
        names.append(name or s.model_name)
        pos_scores.append(s.pos)
    vocab = Vocab(load_vocab(args.vocab)) if args.vocab else None
    extractor = FeatureExtractor(kg.with_triples(split.train), names, vocab=vocab)
    matrix = extractor.featurize_queries(negatives.queries, pos_scores)
    manifest = save_features(_resolve(args.out), matrix, extractor.schema, names)
    print(f"features: {manifest}")
    return 0


def cmd_fit_average(args):
    from .ensemble import fit_global_average
    from .manifests import dump_json, ensure_dir
    from .splits import load_negatives
    kg = _load_kg(args)
    negatives = load_negatives(_resolve(args.negatives_dir), kg)
    score_sets = _load_score_sets(args.scores)
    weights = fit_global_average(score_sets, negatives, partition=args.partition)
    out = ensure_dir(_resolve(args.out))
    dump_json({
        "kind": "global-weights",
        "model_names": weights.model_names,
        "alpha": [float(a) for a in weights.alpha],
        "valid_mrr": weights.valid_mrr,
        "files": {},
    }, out / "manifest.json")
    print(f"weights: {[round(float(a), 4) for a in weights.alpha]} "
          f"(valid MRR {weights.valid_mrr:.4f})")
    return 0


def cmd_train_router(args):
    import numpy as np
    from .ensemble import ALL_SAME, label_router_targets, save_router, train_router
    from .evaluate import compute_metrics, ranks_for
    from .features import load_features
    from .splits import load_negatives
    kg = _load_kg(args)
    negatives = load_negatives(_resolve(args.negatives_dir), kg)
    score_sets = _load_score_sets(args.scores)
    names = [s.model_name for s in score_sets]
    matrix, schema, _ = load_features(_resolve(args.features))
    valid_idx = negatives.indices_for("valid")
    rank_maps = [dict(ranks_for(s, negatives, partition="valid"))
                 for s in score_sets]
    usable = [q for q in valid_idx if all(q in m for m in rank_maps)]
    ranks = np.array([[m[q] for m in rank_maps] for q in usable], dtype=np.int64)
    labels = label_router_targets(ranks)
    router = train_router(matrix[usable], labels, args.kind, seed=args.seed,
                          class_names=names + [ALL_SAME],
                          feature_names=schema.names)
    valid_mrrs = [compute_metrics(s, negatives, partition="valid").mrr
                  for s in score_sets]
    router.allsame_model = names[int(np.argmax(valid_mrrs))]
    manifest = save_router(_resolve(args.out), router)
    print(f"router: {manifest} (cv accuracy {router.cv_accuracy:.4f})")
    return 0


def cmd_train_weighter(args):
    from .ensemble import save_weighter, train_weighter
    from .features import load_features
    from .splits import load_negatives
    kg = _load_kg(args)
    negatives = load_negatives(_resolve(args.negatives_dir), kg)
    score_sets = _load_score_sets(args.scores)
    matrix, _, _ = load_features(_resolve(args.features))
    valid_idx = negatives.indices_for("valid")
    weighter = train_weighter(matrix[valid_idx], score_sets, negatives,
                              margin=args.margin, seed=args.seed)
    manifest = save_weighter(_resolve(args.out), weighter)
    print(f"weighter: {manifest} (holdout MRR {weighter.holdout_mrr})")
    return 0


def cmd_integrate(args):
    import numpy as np
    from .ensemble import GlobalWeights, integrate, load_router, load_weighter
    from .features import load_features
    from .manifests import load_json
    from .scores import save_scores
    from .splits import load_negatives
    kg = _load_kg(args)
    neg_dir = _resolve(args.negatives_dir)
    negatives = load_negatives(neg_dir, kg)
    score_sets = _load_score_sets(args.scores)
    integ_dir = _resolve(args.integrator)
    if args.method == "global-average":
        m = load_json(integ_dir / "manifest.json")
        integrator = GlobalWeights(alpha=np.array(m["alpha"]),
                                   model_names=m["model_names"],
                                   valid_mrr=m["valid_mrr"])
        combined = integrate(args.method, integrator, score_sets)
    else:
        matrix, _, _ = load_features(_resolve(args.features))
        integrator = (load_router(integ_dir) if args.method == "router"
                      else load_weighter(integ_dir))
        combined = integrate(args.method, integrator, score_sets,
                             features=matrix)
    combined.model_name = f"integrated-{args.method}"
    combined.sides = [q.side for q in negatives.queries]
    manifest = save_scores(combined, _resolve(args.out),
                           negatives_manifest_path=neg_dir / "manifest.json")
    print(f"integrated scores: {manifest}")
    return 0


def cmd_evaluate(args):
    from .evaluate import (compute_metrics, description_breakdown,
                           format_metrics_table, per_relation_breakdown,
                           ranks_for)
    from .manifests import dump_json, ensure_dir, sha256_file
    from .splits import load_negatives
    kg = _load_kg(args)
    negatives = load_negatives(_resolve(args.negatives_dir), kg)
    score_sets = _load_score_sets(args.scores)
    breakdowns = [b for b in (args.breakdown or "").split(",") if b]
    report = {"partitions": {}}
    rows = []
    for partition in ("valid", "test"):
        report["partitions"][partition] = {}
        for s in score_sets:
            m = compute_metrics(s, negatives, partition=partition)
            report["partitions"][partition][s.model_name] = m.as_dict()
            rows.append((f"{s.model_name} [{partition}]", m))
    if "relation" in breakdowns:
        report["per_relation"] = {
            s.model_name: {rel: m.as_dict() for rel, m in
                           per_relation_breakdown(s, negatives, kg=kg,
                                                  partition="test").items()}
            for s in score_sets}
    if "description" in breakdowns:
        report["description_breakdown"] = {
            s.model_name: {b: m.as_dict() for b, m in
                           description_breakdown(s, negatives, kg,
                                                 partition="test").items()}
            for s in score_sets}
    print(format_metrics_table(rows))
    if args.out:
        out = ensure_dir(_resolve(args.out))
        report_path = out / "report.json"
        dump_json(report, report_path)
        ranks_path = out / "ranks.tsv"
        with open(ranks_path, "w", encoding="utf-8") as f:
            for s in score_sets:
                for q, rank in ranks_for(s, negatives):
                    f.write(f"{q}\t{s.model_name}\t{rank}\n")
        manifest = {
            "kind": "evaluation",
            "files": {
                "report.json": sha256_file(report_path),
                "ranks.tsv": sha256_file(ranks_path),
            },
        }
        dump_json(manifest, out / "manifest.json")
        print(f"report: {report_path}")
    return 0


def cmd_impute(args):
    from .inductive import (impute_embeddings, load_text_embeddings,
                            random_baseline, save_report)
    from .kge import load_kge, save_kge
    from .splits import load_split
    kg = _load_kg(args)
    model = load_kge(_resolve(args.model_dir))
    split = load_split(_resolve(args.split), kg)
    seen = {int(e) for h, _, t in split.train for e in (h, t)}
    unseen = [e for e in range(len(kg.entities)) if e not in seen]
    if args.random_baseline:
        imputed = random_baseline(model, unseen, args.seed)
        report = None
    else:
        text_emb = load_text_embeddings(_resolve(args.text_emb))
        imputed, report = impute_embeddings(model, text_emb, sorted(seen),
                                            unseen, kg.entity_types)
    out = _resolve(args.out)
    manifest = save_kge(out, imputed)
    if report is not None:
        save_report(out / "imputation.json", report)
    print(f"imputed model: {manifest} ({len(unseen)} entities filled)")
    return 0


def cmd_run(args):
    from .errors import KgcError
    from .pipeline import Pipeline, RunConfig
    try:
        config = RunConfig.load(args.config)
    except (OSError, ValueError, KeyError) as e:
        raise KgcError(f"config invalid: {e}") from e
    if args.seed is not None:
        config.data["seed"] = args.seed
    pipeline = Pipeline(config, log=print)
    report = pipeline.run()
    print(f"report: {report}")
    return 0


def cmd_validate(args):
    from .pipeline import validate_artifacts
    checks = validate_artifacts(_resolve(args.dir))
    failed = 0
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        failed += 0 if c["passed"] else 1
        print(f"{status} {c['name']}: {c['detail']}")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kgc",
        description="Knowledge-graph completion: embeddings, feature-based "
                    "integration, and evaluation with fixed negative sets.")
    parser.add_argument("--deterministic", action="store_true",
                        help="pin all thread pools to one thread")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("synth", cmd_synth, "write the bundled synthetic dataset")
    p.add_argument("--out", default="synthetic")
    p.add_argument("--n-triples", type=int, default=200)

    p = add("split", cmd_split, "partition triples into train/valid/test")
    _add_dataset_args(p)
    p.add_argument("--mode", choices=["transductive", "inductive"],
                   default="transductive")
    p.add_argument("--valid-frac", type=float, default=0.1)
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--tolerance", type=float, default=0.01,
                   help="relative slack on evaluation-set size (inductive)")
    p.add_argument("--out", required=True)

    p = add("negatives", cmd_negatives, "build fixed filtered candidate sets")
    _add_dataset_args(p)
    p.add_argument("--split", required=True)
    p.add_argument("--m-eval", type=int, default=500)
    p.add_argument("--out", required=True)

    p = add("train-kge", cmd_train_kge, "train one embedding model")
    _add_dataset_args(p)
    p.add_argument("--split", required=True)
    p.add_argument("--negatives-dir", default=None,
                   help="candidate sets for validation-MRR checkpointing")
    p.add_argument("--model", required=True)
    p.add_argument("--dim", type=int, default=1000)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--negatives", type=int, default=128,
                   help="corruptions per positive during training")
    p.add_argument("--l3", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--eval-every", type=int, default=500)
    p.add_argument("--out", required=True)

    p = add("score", cmd_score, "score all candidate sets with one model")
    _add_dataset_args(p)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True)

    p = add("features", cmd_features, "featurize every evaluation query")
    _add_dataset_args(p)
    p.add_argument("--split", required=True)
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--scores", action="append", required=True,
                   help="NAME=DIR, repeatable, in model order")
    p.add_argument("--vocab", default=None)
    p.add_argument("--out", required=True)

    p = add("fit-average", cmd_fit_average, "grid-search simplex weights")
    _add_dataset_args(p)
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--scores", action="append", required=True)
    p.add_argument("--partition", default="valid")
    p.add_argument("--out", required=True)

    p = add("train-router", cmd_train_router,
            "classify which model should score each query")
    _add_dataset_args(p)
    p.add_argument("--kind", default="gbdt")
    p.add_argument("--features", required=True)
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--scores", action="append", required=True)
    p.add_argument("--out", required=True)

    p = add("train-weighter", cmd_train_weighter,
            "learn per-query soft model weights")
    _add_dataset_args(p)
    p.add_argument("--features", required=True)
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--scores", action="append", required=True)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = add("integrate", cmd_integrate, "combine model scores into one set")
    _add_dataset_args(p)
    p.add_argument("--method", required=True,
                   choices=["global-average", "router", "weighted-average"])
    p.add_argument("--integrator", required=True)
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--scores", action="append", required=True)
    p.add_argument("--features", default=None)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "ranking metrics and breakdowns")
    _add_dataset_args(p)
    p.add_argument("--scores", action="append", required=True)
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--breakdown", default="")
    p.add_argument("--out", default=None)

    p = add("impute", cmd_impute, "fill embeddings for unseen entities")
    _add_dataset_args(p)
    p.add_argument("--model", dest="model_dir", required=True)
    p.add_argument("--text-emb", default=None)
    p.add_argument("--split", required=True)
    p.add_argument("--random-baseline", action="store_true")
    p.add_argument("--out", required=True)

    p = add("run", cmd_run, "execute the full pipeline from a config")
    p.add_argument("--config", required=True)
    p.set_defaults(seed=None)

    p = add("validate", cmd_validate, "re-check pipeline artifact invariants")
    p.add_argument("--dir", required=True)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--deterministic" in argv:
        force_single_thread()
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import HashMismatch, KgcError, StageFailure
    try:
        return args.fn(args)
    except HashMismatch as e:
        print(f"error: HashMismatch: {e}", file=sys.stderr)
        return 4
    except StageFailure as e:
        print(f"error: StageFailure: {e}", file=sys.stderr)
        return 3
    except KgcError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
