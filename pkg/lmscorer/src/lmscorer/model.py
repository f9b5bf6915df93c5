"""Cross-encoder scorer: a pretrained transformer body with three linear
heads on the last-layer [CLS] vector (ranking score, triple correctness,
relation class)."""

from pathlib import Path

import numpy as np
import torch
from torch import nn

from .artifacts import dump_json, load_json
from .encoding import TripleEncoder


class CrossEncoderScorer(nn.Module):
    def __init__(self, encoder, n_relations):
        super().__init__()
        self.encoder = encoder
        hidden = encoder.config.hidden_size
        self.rank_head = nn.Linear(hidden, 1)
        self.triple_head = nn.Linear(hidden, 1)
        self.rel_head = nn.Linear(hidden, n_relations)

    def cls_vector(self, batch):
        device = next(self.encoder.parameters()).device
        out = self.encoder(input_ids=batch["input_ids"].to(device),
                           attention_mask=batch["attention_mask"].to(device),
                           token_type_ids=batch["token_type_ids"].to(device))
        return out.last_hidden_state[:, 0]

    def forward(self, batch):
        v = self.cls_vector(batch)
        return {
            "cls": v,
            "rank": self.rank_head(v).squeeze(-1),
            "triple": self.triple_head(v).squeeze(-1),
            "rel": self.rel_head(v),
        }


@torch.no_grad()
def score_pairs(model: CrossEncoderScorer, enc: TripleEncoder, pairs,
                batch_size=64) -> np.ndarray:
    """Ranking scores for (head_text, tail_text) pairs, float32."""
    model.eval()
    out = np.empty(len(pairs), dtype=np.float32)
    for lo in range(0, len(pairs), batch_size):
        chunk = pairs[lo: lo + batch_size]
        scores = model(enc.batch_pairs(chunk))["rank"]
        out[lo: lo + len(chunk)] = scores.cpu().numpy().astype(np.float32)
    return out


@torch.no_grad()
def embed_texts(encoder, enc: TripleEncoder, texts, batch_size=64) -> np.ndarray:
    """Last-layer [CLS] vector of `[CLS] text [SEP]` per text, float32."""
    encoder.eval()
    device = next(encoder.parameters()).device
    width = encoder.config.hidden_size
    out = np.empty((len(texts), width), dtype=np.float32)
    for lo in range(0, len(texts), batch_size):
        chunk = texts[lo: lo + batch_size]
        batch = enc.batch_singles(chunk)
        v = encoder(input_ids=batch["input_ids"].to(device),
                    attention_mask=batch["attention_mask"].to(device),
                    token_type_ids=batch["token_type_ids"].to(device)
                    ).last_hidden_state[:, 0]
        out[lo: lo + len(chunk)] = v.cpu().numpy().astype(np.float32)
    return out


def save_scorer(out_dir, model: CrossEncoderScorer, tokenizer, base, relations,
                max_length, extra=None):
    """Persist a trained scorer: encoder + tokenizer in transformers format,
    heads and metadata alongside."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.encoder.save_pretrained(out_dir / "encoder")
    tokenizer.save_pretrained(out_dir / "encoder")
    heads = {k: v.detach().cpu() for k, v in model.state_dict().items()
             if not k.startswith("encoder.")}
    torch.save(heads, out_dir / "heads.pt")
    info = {
        "kind": "lm-scorer",
        "base": str(base),
        "relations": list(relations),
        "max_length": int(max_length),
    }
    info.update(extra or {})
    dump_json(info, out_dir / "scorer.json")
    return out_dir


def load_scorer(model_dir):
    """Rebuild (model, tokenizer, info) from a save_scorer directory."""
    from transformers import AutoModel, AutoTokenizer

    model_dir = Path(model_dir)
    info = load_json(model_dir / "scorer.json")
    encoder = AutoModel.from_pretrained(model_dir / "encoder")
    tokenizer = AutoTokenizer.from_pretrained(model_dir / "encoder")
    model = CrossEncoderScorer(encoder, n_relations=len(info["relations"]))
    heads = torch.load(model_dir / "heads.pt", map_location="cpu",
                       weights_only=True)
    missing, unexpected = model.load_state_dict(heads, strict=False)
    if unexpected or any(not k.startswith("encoder.") for k in missing):
        raise ValueError(f"head weights do not match: missing={missing}, "
                         f"unexpected={unexpected}")
    model.eval()
    return model, tokenizer, info
