"""Command-line entry points: lm-train, lm-score, lm-embed."""

import argparse
import sys

from .errors import LmError


def _dataset_args(p):
    p.add_argument("--metadata", required=True, help="entity metadata TSV")
    p.add_argument("--triples", required=True, help="triples TSV")


def _load_dataset(args):
    from .data import load_dataset
    return load_dataset(args.metadata, args.triples)


def train_parser():
    p = argparse.ArgumentParser(prog="lm-train",
                                description="fine-tune a cross-encoder triple scorer")
    _dataset_args(p)
    p.add_argument("--split", required=True, help="split directory")
    p.add_argument("--negatives-dir", required=True,
                   help="negatives directory (validation MRR + checkpointing)")
    p.add_argument("--base", required=True,
                   help="pretrained model name or local directory")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--negatives", type=int, default=32,
                   help="corruptions per positive")
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--evals-per-epoch", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--micro-batch", type=int, default=None,
                   help="positives per forward pass (gradient accumulation)")
    return p


def cmd_train(args):
    from .artifacts import dump_json
    from .data import load_negatives_dir, load_split_dir
    from .model import save_scorer
    from .train import LmConfig, train_lm

    dataset = _load_dataset(args)
    split = load_split_dir(args.split)
    negatives = load_negatives_dir(args.negatives_dir)
    config = LmConfig(base=args.base, batch_size=args.batch_size, lr=args.lr,
                      epochs=args.epochs, negatives=args.negatives,
                      margin=args.margin, max_length=args.max_length,
                      evals_per_epoch=args.evals_per_epoch, seed=args.seed,
                      micro_batch=args.micro_batch)
    model, tokenizer, history = train_lm(dataset, split["train"], negatives,
                                         config, progress=print)
    best = max((h["valid_mrr"] for h in history), default=None)
    save_scorer(args.out, model, tokenizer, base=args.base,
                relations=dataset.relations, max_length=config.max_length,
                extra={"seed": config.seed, "best_valid_mrr": best})
    dump_json(history, f"{args.out}/history.json")
    print(f"saved scorer to {args.out} (best valid MRR: {best})")
    return 0


def score_parser():
    p = argparse.ArgumentParser(prog="lm-score",
                                description="export a score set for fixed candidate pools")
    _dataset_args(p)
    p.add_argument("--model", required=True, help="lm-train output directory")
    p.add_argument("--negatives-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="lm", help="model name recorded in the manifest")
    p.add_argument("--batch-size", type=int, default=64)
    return p


def cmd_score(args):
    from .data import load_negatives_dir
    from .encoding import TripleEncoder
    from .export import export_scores
    from .model import load_scorer

    dataset = _load_dataset(args)
    negatives = load_negatives_dir(args.negatives_dir)
    model, tokenizer, info = load_scorer(args.model)
    import torch
    if torch.cuda.is_available():
        model.to(torch.device("cuda"))
    enc = TripleEncoder(tokenizer, max_length=info["max_length"])
    export_scores(model, enc, dataset, negatives, args.out,
                  model_name=args.name, batch_size=args.batch_size)
    print(f"wrote {negatives.n_queries} scored queries to {args.out}")
    return 0


def embed_parser():
    p = argparse.ArgumentParser(prog="lm-embed",
                                description="export per-entity text embeddings")
    _dataset_args(p)
    p.add_argument("--mode", required=True, choices=["frozen", "fine-tuned"])
    p.add_argument("--base", help="pretrained model (frozen mode)")
    p.add_argument("--model", help="lm-train output directory (fine-tuned mode)")
    p.add_argument("--out", required=True)
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=64)
    return p


def cmd_embed(args):
    from .encoding import TripleEncoder
    from .export import export_entity_embeddings
    from .model import load_scorer

    dataset = _load_dataset(args)
    if args.mode == "frozen":
        if not args.base:
            raise LmError("--base is required with --mode frozen")
        from transformers import AutoModel, AutoTokenizer
        encoder = AutoModel.from_pretrained(args.base)
        tokenizer = AutoTokenizer.from_pretrained(args.base)
        name = args.base
        max_length = args.max_length
    else:
        if not args.model:
            raise LmError("--model is required with --mode fine-tuned")
        model, tokenizer, info = load_scorer(args.model)
        encoder = model.encoder
        name = info["base"]
        max_length = info["max_length"]
    import torch
    if torch.cuda.is_available():
        encoder.to(torch.device("cuda"))
    enc = TripleEncoder(tokenizer, max_length=max_length)
    export_entity_embeddings(encoder, enc, dataset, args.out, mode=args.mode,
                             encoder_name=name, batch_size=args.batch_size)
    print(f"wrote {len(dataset.entities)} embeddings to {args.out}")
    return 0


def _run(parser, handler, argv):
    args = parser.parse_args(argv)
    try:
        return handler(args)
    except LmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main_train(argv=None):
    return _run(train_parser(), cmd_train, argv)


def main_score(argv=None):
    return _run(score_parser(), cmd_score, argv)


def main_embed(argv=None):
    return _run(embed_parser(), cmd_embed, argv)
