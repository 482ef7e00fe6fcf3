"""Exception types raised by the ingest and analysis pipeline."""


class EgoLayersError(Exception):
    """Base class for all package errors."""


class ParseError(EgoLayersError):
    """A CSV row could not be read. ``line`` is 1-based and counts the header."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(EgoLayersError):
    """Input was well-formed but violates a data invariant."""


class InfeasibleTargetError(EgoLayersError, ValueError):
    """DBSCAN cannot reach the requested cluster count for this many points."""
