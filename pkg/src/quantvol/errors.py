"""Exception hierarchy for quantvol."""

from __future__ import annotations


class QuantvolError(Exception):
    """Base class for every error raised by the package."""


class SchemaError(QuantvolError):
    """A required CSV column is missing."""


class ParseError(QuantvolError):
    """A CSV row could not be parsed. ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyInputError(QuantvolError):
    pass


class AlignmentError(QuantvolError):
    pass


class DegenerateStatisticError(QuantvolError):
    """A hit series is constant, so the quantilogram denominator carries no information."""


class InferenceError(QuantvolError):
    pass


class NumericalError(QuantvolError):
    pass


class FitError(QuantvolError):
    """Optimizer failure. ``best_params`` holds the best point reached, if any."""

    def __init__(self, message: str, best_params=None) -> None:
        super().__init__(message)
        self.best_params = best_params


class EstimationError(QuantvolError):
    pass


class DegenerateTestError(QuantvolError):
    """Loss differentials have zero long-run variance; the DMW statistic is undefined."""


class LookAheadError(QuantvolError):
    pass
