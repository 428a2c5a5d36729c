"""Exception types shared across the package."""


class ClusterSimError(Exception):
    """Base class for every error raised by clustersim."""


class DomainError(ClusterSimError, ValueError):
    """A precondition of a simulation or analysis routine was violated."""


class ImpossibleBranchError(DomainError):
    """A forced measurement outcome has (numerically) zero probability."""


class ParseError(ClusterSimError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
