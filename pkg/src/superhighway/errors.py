"""Exception hierarchy shared by every stage of the pipeline."""


class SuperhighwayError(Exception):
    """Base class; the CLI maps subclasses to one-line error codes."""

    @property
    def code(self) -> str:
        return type(self).__name__


class NotFound(SuperhighwayError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class InvalidParam(SuperhighwayError, ValueError):
    pass


class GraphInvariantError(SuperhighwayError, ValueError):
    pass


class EmptySharedItems(SuperhighwayError):
    pass


class DomainMismatch(SuperhighwayError, ValueError):
    pass


class CapExceeded(SuperhighwayError):
    pass


class DivergenceError(SuperhighwayError, FloatingPointError):
    def __init__(self, epoch: int, learning_rate: float):
        super().__init__(
            f"training diverged (non-finite loss) at epoch {epoch} "
            f"with learning rate {learning_rate:g}"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


class InvalidRanking(SuperhighwayError, ValueError):
    pass


class EmptyEvalSet(SuperhighwayError):
    pass


class CoverageError(SuperhighwayError):
    pass


class IngestError(SuperhighwayError, ValueError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class EmptyDomain(SuperhighwayError):
    pass


class ArtifactError(SuperhighwayError):
    """Unreadable, stale or version-mismatched artifact file."""
