"""Cross-encoder triple scorer for knowledge-graph completion.

Fine-tunes a pretrained transformer to score (head, tail) text pairs with a
multi-task objective, then exports score sets and entity text embeddings in
the kgcomplete artifact formats so the two toolkits compose through files
alone.
"""

from .errors import LmError, ManifestMismatch, TrainingDiverged
from .train import LmConfig, SEARCH_GRID, train_lm

__all__ = [
    "LmConfig", "SEARCH_GRID", "train_lm",
    "LmError", "ManifestMismatch", "TrainingDiverged",
]
