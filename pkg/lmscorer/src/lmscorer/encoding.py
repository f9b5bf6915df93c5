"""Token sequence construction for the cross-encoder.

A triple is encoded as `[CLS] text(h) [SEP] text(t) [SEP]` with segment 0
covering the head (and [CLS]) and segment 1 the tail; the relation string is
never tokenized. When the pair exceeds the length cap, each side is
truncated proportionally to its token count.
"""

from typing import List, Tuple

import torch


class TripleEncoder:
    def __init__(self, tokenizer, max_length=128):
        self.tokenizer = tokenizer
        self.max_length = int(max_length)
        self.cls_id = tokenizer.cls_token_id
        self.sep_id = tokenizer.sep_token_id
        self.pad_id = tokenizer.pad_token_id
        if None in (self.cls_id, self.sep_id, self.pad_id):
            raise ValueError("tokenizer must define [CLS], [SEP], and [PAD]")

    def _ids(self, text) -> List[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def trim_pair(self, h_ids, t_ids) -> Tuple[List[int], List[int]]:
        """Fit both sides into max_length - 3 (room for [CLS] and two [SEP]),
        keeping each side's share proportional to its length."""
        budget = self.max_length - 3
        lh, lt = len(h_ids), len(t_ids)
        if lh + lt <= budget:
            return h_ids, t_ids
        keep_h = round(budget * lh / (lh + lt))
        keep_h = min(lh, max(keep_h, budget - lt))
        # a nonempty side must keep at least one token
        if lh and keep_h == 0:
            keep_h = 1
        elif lt and keep_h == budget:
            keep_h = budget - 1
        return h_ids[:keep_h], t_ids[: budget - keep_h]

    def encode_pair(self, head_text, tail_text):
        h_ids, t_ids = self.trim_pair(self._ids(head_text), self._ids(tail_text))
        ids = [self.cls_id] + h_ids + [self.sep_id] + t_ids + [self.sep_id]
        types = [0] * (len(h_ids) + 2) + [1] * (len(t_ids) + 1)
        return ids, types

    def encode_single(self, text):
        ids = self._ids(text)[: self.max_length - 2]
        ids = [self.cls_id] + ids + [self.sep_id]
        return ids, [0] * len(ids)

    def collate(self, encoded):
        """Pad a list of (ids, types) into input_ids / token_type_ids /
        attention_mask tensors."""
        width = max(len(ids) for ids, _ in encoded)
        n = len(encoded)
        input_ids = torch.full((n, width), self.pad_id, dtype=torch.long)
        token_type_ids = torch.zeros((n, width), dtype=torch.long)
        attention_mask = torch.zeros((n, width), dtype=torch.long)
        for i, (ids, types) in enumerate(encoded):
            input_ids[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            token_type_ids[i, : len(types)] = torch.tensor(types, dtype=torch.long)
            attention_mask[i, : len(ids)] = 1
        return {"input_ids": input_ids, "token_type_ids": token_type_ids,
                "attention_mask": attention_mask}

    def batch_pairs(self, pairs):
        return self.collate([self.encode_pair(h, t) for h, t in pairs])

    def batch_singles(self, texts):
        return self.collate([self.encode_single(t) for t in texts])
