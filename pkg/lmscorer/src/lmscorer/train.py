"""Fine-tuning loop: max-margin ranking with same-type corruptions plus the
two classification tasks, periodic validation MRR, best checkpoint kept."""

import copy
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from .data import Dataset, EvalNegatives, query_pair
from .encoding import TripleEncoder
from .errors import TrainingDiverged
from .loss import multitask_loss
from .model import CrossEncoderScorer, score_pairs

# Tuned search space; negatives per positive and the epoch/eval schedule are
# fixed per dataset scale rather than searched.
SEARCH_GRID = {
    "batch_size": (16, 32),
    "lr": (1e-5, 3e-5, 5e-5),
}
NEGATIVES_BY_SCALE = {"small": 32, "medium": 16, "large": 8}
EPOCHS_BY_SCALE = {"small": 40, "medium": 10, "large": 10}
EVALS_PER_EPOCH_BY_SCALE = {"small": 1, "medium": 3, "large": 3}


@dataclass
class LmConfig:
    base: str                 # pretrained model name or local directory
    batch_size: int = 16
    lr: float = 1e-5
    epochs: int = 40
    negatives: int = 32
    margin: float = 1.0
    max_length: int = 128
    evals_per_epoch: int = 1
    seed: int = 0
    # positives per forward pass; gradients accumulate so the update equals
    # a whole-batch step. None runs the full batch in one pass.
    micro_batch: Optional[int] = None


def pessimistic_mrr(pos, negs):
    """Mean reciprocal rank with ties counted against the positive; queries
    with empty candidate pools are skipped."""
    total, used = 0.0, 0
    for p, n in zip(pos, negs):
        if len(n) == 0:
            continue
        n = np.asarray(n)
        rank = 1 + int(np.sum(n > p)) + int(np.sum(n == p))
        total += 1.0 / rank
        used += 1
    return total / used if used else 0.0


def validation_mrr(model, enc, dataset: Dataset, negatives: EvalNegatives,
                   partition="valid", batch_size=64):
    pos_scores, neg_scores = [], []
    for q, cands in zip(negatives.queries, negatives.candidates):
        if q.partition != partition:
            continue
        pairs = [query_pair(q, dataset)] + [query_pair(q, dataset, c) for c in cands]
        scores = score_pairs(model, enc, pairs, batch_size=batch_size)
        pos_scores.append(float(scores[0]))
        neg_scores.append(scores[1:])
    return pessimistic_mrr(pos_scores, neg_scores)


def _corrupt(triple, dataset: Dataset, by_type, known, n, rng):
    """n same-type corruptions of (hk, rel, tk), head or tail uniformly;
    resamples a few times to dodge the original entity and known positives,
    then keeps whatever it has (training-time sampling is unfiltered by
    design, this only avoids the most pathological duplicates)."""
    hk, rel, tk = triple
    out = []
    for _ in range(n):
        side = int(rng.integers(0, 2))
        orig = hk if side == 0 else tk
        pool = by_type[dataset.entities[orig].etype]
        cand = triple
        for _ in range(10):
            e = pool[int(rng.integers(0, len(pool)))]
            cand = (e, rel, tk) if side == 0 else (hk, rel, e)
            if e != orig and cand not in known:
                break
        out.append(cand)
    return out


def train_lm(dataset: Dataset, train_triples, negatives: Optional[EvalNegatives],
             config: LmConfig, progress=None):
    """Fine-tune a cross-encoder on train_triples.

    Validation MRR is computed on the valid-partition queries of
    `negatives` at the configured cadence and the best-scoring weights are
    restored before returning. With no negatives (or zero epochs) the final
    weights are returned as-is. Returns (model, tokenizer, history).
    """
    from transformers import AutoModel, AutoTokenizer

    torch.manual_seed(config.seed)
    rng = np.random.default_rng([config.seed, 1])

    encoder = AutoModel.from_pretrained(config.base)
    tokenizer = AutoTokenizer.from_pretrained(config.base)
    model = CrossEncoderScorer(encoder, n_relations=len(dataset.relations))
    if torch.cuda.is_available():
        model.to(torch.device("cuda"))
    enc = TripleEncoder(tokenizer, max_length=config.max_length)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)

    rel_index = dataset.relation_index
    by_type = dataset.keys_by_type()
    known = set(train_triples)
    triples = list(train_triples)

    history = []
    best_mrr = -1.0
    best_state = None
    step = 0

    def evaluate(epoch):
        nonlocal best_mrr, best_state
        if negatives is None:
            return
        mrr = validation_mrr(model, enc, dataset, negatives)
        history.append({"epoch": epoch, "step": step, "valid_mrr": mrr})
        if mrr > best_mrr:
            best_mrr = mrr
            best_state = copy.deepcopy(model.state_dict())
        if progress:
            progress(f"epoch {epoch}: valid MRR {mrr:.4f}")

    for epoch in range(1, config.epochs + 1):
        model.train()
        order = rng.permutation(len(triples))
        n_batches = math.ceil(len(triples) / config.batch_size)
        eval_points = {n_batches * (k + 1) // config.evals_per_epoch
                       for k in range(config.evals_per_epoch - 1)}
        for b in range(n_batches):
            batch = [triples[i] for i in order[b * config.batch_size:
                                               (b + 1) * config.batch_size]]
            pos_pairs = [(dataset.text(h), dataset.text(t)) for h, _, t in batch]
            neg_pairs = []
            for triple in batch:
                for hk, _, tk in _corrupt(triple, dataset, by_type, known,
                                          config.negatives, rng):
                    neg_pairs.append((dataset.text(hk), dataset.text(tk)))
            B, N = len(batch), config.negatives
            mb = config.micro_batch or B
            opt.zero_grad()
            # each chunk holds b positives followed by their b*N negatives;
            # losses scale by b/B so accumulated grads equal one whole-batch
            # step regardless of mb
            for lo in range(0, B, mb):
                hi = min(lo + mb, B)
                bsub = hi - lo
                pairs = pos_pairs[lo:hi] + neg_pairs[lo * N: hi * N]
                out = model(enc.batch_pairs(pairs))
                pos_scores = out["rank"][:bsub]
                neg_scores = out["rank"][bsub:].reshape(bsub, N)
                device = out["rank"].device
                triple_labels = torch.cat([torch.ones(bsub),
                                           torch.zeros(bsub * N)]).to(device)
                rels = [rel_index[r] for _, r, _ in batch[lo:hi]]
                rel_labels = torch.cat([
                    torch.tensor(rels, dtype=torch.long),
                    torch.tensor([r for r in rels for _ in range(N)],
                                 dtype=torch.long)]).to(device)
                loss, _ = multitask_loss(pos_scores, neg_scores,
                                         out["triple"], triple_labels,
                                         out["rel"], rel_labels,
                                         margin=config.margin)
                if not math.isfinite(float(loss.detach())):
                    raise TrainingDiverged(f"non-finite loss at step {step}")
                (loss * (bsub / B)).backward()
            opt.step()
            step += 1
            if (b + 1) in eval_points:
                evaluate(epoch)
                model.train()
        evaluate(epoch)

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return model, tokenizer, history
