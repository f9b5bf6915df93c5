class LmError(Exception):
    """Base for every error this package raises deliberately."""


class ManifestMismatch(LmError):
    """An input artifact's bytes disagree with its recorded hash, or a
    required manifest is missing."""


class TrainingDiverged(LmError):
    """The training loss became non-finite."""
