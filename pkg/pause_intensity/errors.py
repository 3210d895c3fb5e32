"""
Exception hierarchy for the pause intensity library.

Validation problems derive from ``ValueError`` so callers that only know the
standard library can still catch them; iteration caps derive from
``RuntimeError``.
"""

from typing import Optional


class PauseIntensityError(Exception):
    """Base class for every error raised by the library."""


class DomainError(PauseIntensityError, ValueError):
    """An argument or configuration lies outside its valid domain."""


class OutOfRangeError(DomainError):
    """A target value cannot be reached by the model being inverted."""


class NoPauseRegimeError(DomainError):
    """Throughput meets or exceeds the playout rate, so play never ends."""


class NonMonotoneMapError(DomainError):
    """A change of variables was requested through a non-monotone map."""


class UndefinedCorrelationError(DomainError):
    """A correlation coefficient is undefined for the given samples."""


class TraceFormatError(DomainError):
    """A session trace file or event sequence is malformed."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DatasetError(DomainError):
    """A subjective dataset failed to parse or validate."""

    def __init__(self, message: str, row: Optional[int] = None) -> None:
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConvergenceError(PauseIntensityError, RuntimeError):
    """An iterative procedure hit its iteration cap."""
