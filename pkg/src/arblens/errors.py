"""Exception taxonomy.

Everything raised on purpose derives from ArbLensError so CLI handlers can
map library failures to exit code 1 without catching bugs by accident.
"""

from __future__ import annotations

__all__ = [
    "ArbLensError",
    "InvalidIncrementError",
    "NoLiquidityError",
    "BelowMinimumError",
    "MissingRateError",
    "UnlistedPairError",
    "CapacityExceededError",
    "InvalidComparisonError",
    "InvalidPairingError",
    "InvalidPriceError",
    "ParseError",
    "UnknownSymbolError",
    "DuplicateIdError",
    "ScheduleRangeError",
    "InvalidScheduleError",
    "InvalidOrderError",
    "OrderRejectedError",
    "ScenarioConfigError",
    "ConsistencyError",
]


class ArbLensError(Exception):
    """Base class for all intentional arblens failures."""


class InvalidIncrementError(ArbLensError):
    """A rounding increment was zero or negative."""


class NoLiquidityError(ArbLensError):
    """The book side needed for a conversion is empty or absent."""


class BelowMinimumError(ArbLensError):
    """Quantity rounds below the listing's minimum lot."""


class MissingRateError(ArbLensError):
    """A BNB conversion rate or valuation ratio is unavailable."""


class UnlistedPairError(ArbLensError):
    """No listing exists between the two coins."""


class CapacityExceededError(ArbLensError):
    """Requested quantity exceeds the cycle/path capacity."""


class InvalidComparisonError(ArbLensError):
    """Conversion paths being compared do not share endpoints."""


class InvalidPairingError(ArbLensError):
    """Two trades cannot be quantity-matched (no single common coin)."""


class InvalidPriceError(ArbLensError):
    """A price that must be positive is zero or negative."""


class ParseError(ArbLensError):
    """A data file row could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownSymbolError(ParseError):
    """A trade references a symbol absent from the listing universe."""


class DuplicateIdError(ParseError):
    """Two trade rows carry the same id."""


class ScheduleRangeError(ArbLensError):
    """Timestamp precedes the first fee-schedule interval."""


class InvalidScheduleError(ArbLensError):
    """Fee-schedule intervals overlap or are malformed."""


class InvalidOrderError(ArbLensError):
    """An order violates its listing's quantity/price constraints."""


class OrderRejectedError(ArbLensError):
    """Order rejected by exchange rules (e.g. a crossing LIMIT_MAKER)."""


class ScenarioConfigError(ArbLensError):
    """A scenario spec is unsatisfiable (unknown pair, bad agent, ...)."""


class ConsistencyError(ArbLensError):
    """Inputs that must share provenance do not."""
