"""Multi-task objective: ranking margin + triple classification + relation
classification, summed with equal weights."""

import torch
import torch.nn.functional as F


def multitask_loss(pos_scores, neg_scores, triple_logits, triple_labels,
                   rel_logits, rel_labels, margin=1.0):
    """Total loss and its three parts.

    pos_scores (B,) and neg_scores (B, N) are ranking scores with negatives
    grouped per positive; the margin term averages max(0, margin - pos + neg)
    over each positive's negatives, then over the batch. triple_logits (M,)
    are pre-sigmoid correctness logits with float labels in {0, 1};
    rel_logits (M, R) are relation-class logits with int64 labels. Returns
    (total, parts) where total is the unweighted sum of the three parts.
    """
    rank = torch.clamp(margin - pos_scores.unsqueeze(1) + neg_scores, min=0.0)
    rank = rank.mean(dim=1).mean()
    triple = F.binary_cross_entropy_with_logits(triple_logits, triple_labels)
    rel = F.cross_entropy(rel_logits, rel_labels)
    total = rank + triple + rel
    return total, {"rank": rank, "triple": triple, "rel": rel}
