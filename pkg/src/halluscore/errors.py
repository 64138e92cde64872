"""Exception hierarchy for the scoring engine.

Every :class:`HalluscoreError` is a diagnosed input or usage fault (CLI
exit 2); exceptions outside the hierarchy are internal faults (CLI exit 3).
"""

from __future__ import annotations


class HalluscoreError(Exception):
    """Base class for all engine faults."""


class ParseError(HalluscoreError):
    """Malformed input file; carries path and, when known, a line number."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class AlignmentError(HalluscoreError):
    """Entity spans cannot be mapped onto the trace's tokens."""


class ScorerError(HalluscoreError):
    """A scorer's precondition does not hold for the given trace."""


class AggregationError(HalluscoreError):
    """A token range does not fit the token score vector."""


class MetricError(HalluscoreError):
    """A metric is undefined for the given labels/scores."""


class UsageError(HalluscoreError):
    """Inconsistent or unsupported combination of CLI inputs."""
