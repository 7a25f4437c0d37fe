"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PegError(Exception):
    """Base class for all package-specific failures."""

    category = "error"


class GraphParseError(PegError):
    """Malformed graph file; carries the offending 1-based line number."""

    category = "parse"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CapacityError(PegError):
    """State space or table budget exceeded."""

    category = "capacity"


class ModeError(PegError):
    """Operation not supported in the spec's exit mode (e.g. DP on exit games)."""

    category = "mode"


class IllegalMoveError(PegError):
    """Move target outside the acting agent's closed neighborhood.

    ``agent`` is the pursuer index (0-based), or ``m`` for the evader.
    """

    category = "illegal-move"

    def __init__(self, message: str, agent: int):
        self.agent = agent
        super().__init__(message)


class QueryError(PegError):
    """Policy queried at a terminal state."""

    category = "query"


class InfeasibleSpecError(PegError):
    """Initial-condition sampler exhausted its rejection budget."""

    category = "infeasible"


class ProtocolError(PegError):
    """External policy protocol violation, timeout, or illegal reply."""

    category = "protocol"


class MalformedFeatureError(PegError):
    """Distance feature does not encode a reconstructible state."""

    category = "feature"


class FingerprintMismatchError(PegError):
    """Persisted artifact does not belong to the given game spec."""

    category = "fingerprint"
