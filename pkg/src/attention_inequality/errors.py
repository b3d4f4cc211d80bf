"""Exception types shared across the package."""

from __future__ import annotations


class AttentionError(Exception):
    """Base class for all errors raised by this package."""


class EmptySample(AttentionError, ValueError):
    pass


class ZeroMean(AttentionError, ValueError):
    pass


class NegativeValue(AttentionError, ValueError):
    pass


class FractionOutOfRange(AttentionError, ValueError):
    pass


class TooShort(AttentionError, ValueError):
    pass


class DegenerateSeries(AttentionError, ValueError):
    """Raised when a series has zero variance, so kurtosis is undefined."""


class BadBase(AttentionError, ValueError):
    pass


class NonFiniteResult(AttentionError, ArithmeticError):
    """A model evaluation overflowed or produced NaN."""


class BadStep(AttentionError, ValueError):
    pass


class TooFewUsers(AttentionError, ValueError):
    pass


class DegenerateData(AttentionError, ValueError):
    """The data cannot identify any of the requested parameters."""


class LengthMismatch(AttentionError, ValueError):
    pass


class EmptyInput(AttentionError, ValueError):
    pass


class ParseError(AttentionError, ValueError):
    """A CSV row could not be parsed.

    ``line_number`` is 1-based and counts the header row.
    """

    def __init__(self, line_number: int, reason: str, source: str | None = None):
        self.line_number = line_number
        self.reason = reason
        self.source = source
        where = f"{source}:" if source else "line "
        super().__init__(f"{where}{line_number}: {reason}")


class BadAction(ParseError):
    pass


class TimestampBeforeOrigin(AttentionError, ValueError):
    pass


class BadConfig(AttentionError, ValueError):
    pass


class NoConvergenceWarning(UserWarning):
    """Local polish hit its iteration cap; the grid estimate was kept."""
