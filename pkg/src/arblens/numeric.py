"""Exact decimal arithmetic helpers.

All prices, quantities, fees, and ratios are `decimal.Decimal`. Floats are
never used on money paths: residues live at the 1e-8 scale and below, where
binary floating point silently destroys them. Multiplication, addition, and
subtraction of exchange-scale values are exact under the module context;
division carries 50 significant digits. Whenever a value must land on a
grid (an order increment, a published scale-8 figure), the rounding
direction is explicit at the call site.
"""

from __future__ import annotations

from decimal import Decimal, Context, ROUND_DOWN, ROUND_FLOOR, ROUND_HALF_EVEN

from .errors import InvalidIncrementError

__all__ = [
    "CTX",
    "D",
    "ZERO",
    "ONE",
    "SCALE8",
    "BPS",
    "q8",
    "div",
    "round_down",
]

# 50 significant digits: products and sums of scale-8 exchange values stay
# exact, and quotients keep far more headroom than any reported figure needs.
CTX = Context(prec=50, rounding=ROUND_HALF_EVEN)

ZERO = Decimal(0)
ONE = Decimal(1)
SCALE8 = Decimal("1E-8")
BPS = Decimal("1E-4")


def D(value) -> Decimal:
    """Convert a string/int/Decimal to Decimal. Floats are rejected."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        raise TypeError(f"float {value!r} not allowed on money paths; pass a string")
    return Decimal(value)


def q8(x: Decimal, rounding: str = ROUND_HALF_EVEN) -> Decimal:
    """Quantize to 8 fractional digits with an explicit rounding mode."""
    return x.quantize(SCALE8, rounding=rounding, context=CTX)


def div(a: Decimal, b: Decimal) -> Decimal:
    """Divide at full context precision (50 significant digits)."""
    return CTX.divide(a, b)


def round_down(x: Decimal, inc: Decimal) -> Decimal:
    """Round ``x`` down to the nearest multiple of ``inc`` (floor).

    Exact for any decimal increment: computed via the remainder, never via
    an intermediate quotient that could itself round.
    """
    if inc <= 0:
        raise InvalidIncrementError(f"increment must be > 0, got {inc}")
    r = CTX.remainder(x, inc)
    out = CTX.subtract(x, r)
    if r < 0:
        # Decimal remainder truncates toward zero; shift once for floor
        # semantics on negative inputs.
        out = CTX.subtract(out, inc)
    return out
