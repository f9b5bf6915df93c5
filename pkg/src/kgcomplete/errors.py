"""Exception types shared across the toolkit."""


class KgcError(Exception):
    """Base class for all toolkit errors."""


class MalformedLine(KgcError):
    def __init__(self, path, lineno, reason):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = str(path)
        self.lineno = lineno
        self.reason = reason


class MissingEntityMetadata(KgcError):
    pass


class UnknownEntity(KgcError):
    pass


class SplitInfeasible(KgcError):
    pass


class NoCandidates(KgcError):
    pass


class NonFiniteLoss(KgcError):
    def __init__(self, step, value):
        super().__init__(f"non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value


class MisalignedScoreSets(KgcError):
    pass


class SchemaMismatch(KgcError):
    pass


class DegenerateLabels(KgcError):
    pass


class UnsupportedRouterKind(KgcError):
    pass


class ZeroVector(KgcError):
    pass


class NoSameTypeNeighbor(KgcError):
    pass


class MissingVector(KgcError):
    pass


class StageFailure(KgcError):
    pass


class HashMismatch(KgcError):
    pass
