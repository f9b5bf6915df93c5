import numpy as np
import torch

from lmscorer.loss import multitask_loss


def test_zero_loss_when_everything_is_right():
    # margins satisfied by 1.0 exactly, classification logits saturated the
    # right way: every term vanishes and so does the sum
    pos = torch.tensor([2.0, 3.0])
    neg = torch.tensor([[1.0, 0.5], [2.0, 1.0]])
    triple_logits = torch.tensor([200.0, 200.0, -200.0, -200.0])
    triple_labels = torch.tensor([1.0, 1.0, 0.0, 0.0])
    rel_logits = torch.tensor([[200.0, 0.0], [0.0, 200.0], [200.0, 0.0], [0.0, 200.0]])
    rel_labels = torch.tensor([0, 1, 0, 1])
    total, parts = multitask_loss(pos, neg, triple_logits, triple_labels,
                                  rel_logits, rel_labels, margin=1.0)
    assert float(total) == 0.0
    assert all(float(v) == 0.0 for v in parts.values())


def test_single_relation_class_contributes_nothing():
    # softmax over one class is identically 1, so its log-loss is exactly 0
    pos = torch.tensor([0.0])
    neg = torch.tensor([[5.0]])
    rel_logits = torch.tensor([[3.7], [-120.0]])
    rel_labels = torch.tensor([0, 0])
    total, parts = multitask_loss(pos, neg,
                                  torch.tensor([0.0, 0.0]),
                                  torch.tensor([1.0, 0.0]),
                                  rel_logits, rel_labels)
    assert float(parts["rel"]) == 0.0
    assert float(total) == float(parts["rank"]) + float(parts["triple"])


def _oracle(pos, neg, tl, ty, rl, ry, margin):
    """Term-by-term arithmetic in numpy, independent of the torch path."""
    rank = np.mean([np.mean(np.maximum(0.0, margin - p + n))
                    for p, n in zip(pos, neg)])
    p = 1.0 / (1.0 + np.exp(-np.asarray(tl)))
    triple = -np.mean(ty * np.log(p) + (1 - np.asarray(ty)) * np.log(1 - p))
    logits = np.asarray(rl, dtype=np.float64)
    logq = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    rel = -np.mean([logq[i, c] for i, c in enumerate(ry)])
    return rank, triple, rel


def test_matches_arithmetic_oracle():
    rng = np.random.default_rng(3)
    pos = rng.normal(size=4)
    neg = rng.normal(size=(4, 3))
    tl = rng.normal(size=8)
    ty = rng.integers(0, 2, size=8).astype(float)
    rl = rng.normal(size=(8, 5))
    ry = rng.integers(0, 5, size=8)
    margin = 0.7

    total, parts = multitask_loss(
        torch.tensor(pos), torch.tensor(neg),
        torch.tensor(tl), torch.tensor(ty),
        torch.tensor(rl), torch.tensor(ry), margin=margin)

    rank, triple, rel = _oracle(pos, neg, tl, ty, rl, ry, margin)
    assert abs(float(parts["rank"]) - rank) < 1e-9
    assert abs(float(parts["triple"]) - triple) < 1e-9
    assert abs(float(parts["rel"]) - rel) < 1e-9
    assert abs(float(total) - (rank + triple + rel)) < 1e-6


def test_total_is_the_unweighted_sum():
    rng = np.random.default_rng(11)
    for _ in range(20):
        b, n, m, r = (int(rng.integers(1, 5)), int(rng.integers(1, 4)),
                      int(rng.integers(1, 7)), int(rng.integers(1, 4)))
        total, parts = multitask_loss(
            torch.tensor(rng.normal(size=b)),
            torch.tensor(rng.normal(size=(b, n))),
            torch.tensor(rng.normal(size=m)),
            torch.tensor(rng.integers(0, 2, size=m).astype(float)),
            torch.tensor(rng.normal(size=(m, r))),
            torch.tensor(rng.integers(0, r, size=m)))
        s = sum(float(v) for v in parts.values())
        assert abs(float(total) - s) < 1e-6
        assert all(float(v) >= 0.0 for v in parts.values())
