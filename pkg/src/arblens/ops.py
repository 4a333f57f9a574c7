"""Single-conversion primitives: ratios, capacities, residuals, fees.

Every operation is a pure function of a ``Direction`` (conversion resolved
against a listing) and a ``BookTop``. The two listing orientations behave
differently throughout:

* from-coin is the quote asset -> you buy the base at the ask; the ratio is
  the reciprocal ask price and the submitted quantity is ``q / ask``.
* from-coin is the base asset -> you sell the base into the bid; the ratio
  is the bid price and the submitted quantity is ``q`` itself.

Residuals are computed as ``q - floor(T(q)) * price`` rather than
``(T(q) - floor(T(q))) * price`` so that stripping the residual and
converting again leaves exactly zero, with no quotient round-off leaking
into the invariant.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .errors import BelowMinimumError, NoLiquidityError
from .market import BnbRates, BookTop, Coin, Direction, FeeModel, Orientation, Role
from .numeric import ONE, ZERO, div, round_down

__all__ = [
    "exchange_ratio",
    "pair_capacity",
    "bid_ask_spread",
    "trade_quantity",
    "executable_quantity",
    "residual",
    "leg_output",
    "LegResult",
    "convert_leg",
    "bnb_rate",
]


def _ask(dir: Direction, top: BookTop) -> Decimal:
    if top.ask_price is None:
        raise NoLiquidityError(f"{dir.listing.symbol}: no ask")
    return top.ask_price


def _bid(dir: Direction, top: BookTop) -> Decimal:
    if top.bid_price is None:
        raise NoLiquidityError(f"{dir.listing.symbol}: no bid")
    return top.bid_price


def exchange_ratio(dir: Direction, top: BookTop) -> Decimal:
    """Proceeds of converting one unit of the from-coin to the to-coin."""
    if dir.orientation is Orientation.FROM_IS_QUOTE:
        return div(ONE, _ask(dir, top))
    return _bid(dir, top)


def pair_capacity(dir: Direction, top: BookTop) -> Decimal:
    """Maximum from-coin quantity convertible at the top of the book."""
    if dir.orientation is Orientation.FROM_IS_QUOTE:
        ask = _ask(dir, top)
        if top.ask_qty is None:
            raise NoLiquidityError(f"{dir.listing.symbol}: no ask quantity")
        return ask * top.ask_qty
    if top.bid_qty is None:
        raise NoLiquidityError(f"{dir.listing.symbol}: no bid quantity")
    return top.bid_qty


def bid_ask_spread(dir: Direction, top: BookTop) -> Decimal:
    """Ask minus bid of the listed pair; identical for both orientations."""
    return _ask(dir, top) - _bid(dir, top)


def trade_quantity(dir: Direction, q: Decimal, top: BookTop) -> Decimal:
    """Quantity parameter passed to the exchange (base-asset terms)."""
    if dir.orientation is Orientation.FROM_IS_QUOTE:
        return div(q, _ask(dir, top))
    return q


def executable_quantity(dir: Direction, q: Decimal, top: BookTop) -> Decimal:
    """Trade quantity floored to the listing's quantity increment."""
    return round_down(trade_quantity(dir, q, top), dir.listing.qty_increment)


def residual(dir: Direction, q: Decimal, top: BookTop) -> Decimal:
    """From-coin quantity stranded by increment rounding when converting q."""
    executable = executable_quantity(dir, q, top)
    if dir.orientation is Orientation.FROM_IS_QUOTE:
        return q - executable * _ask(dir, top)
    return q - executable


def leg_output(dir: Direction, q: Decimal, top: BookTop) -> Decimal:
    """Gross to-coin proceeds of converting q, i.e. ratio * (q - residual)."""
    executable = executable_quantity(dir, q, top)
    if dir.orientation is Orientation.FROM_IS_QUOTE:
        # (1/ask) * (executable * ask) collapses exactly to the executable
        # base quantity.
        return executable
    return _bid(dir, top) * executable


@dataclass(frozen=True, slots=True)
class LegResult:
    """Outcome of one conversion leg.

    ``fee_amount`` is always stated in proceeds-coin terms. When the fee is
    settled from the BNB balance the proceeds are untouched (net == gross)
    and ``fee_bnb`` carries the BNB-terms amount when rates are supplied.
    """

    gross: Decimal
    fee_amount: Decimal
    net: Decimal
    residual: Decimal
    fee_bnb: Decimal | None = None


def convert_leg(
    q: Decimal,
    dir: Direction,
    top: BookTop,
    fee: FeeModel,
    role: Role,
    rates: BnbRates | None = None,
) -> LegResult:
    """Convert q units of the from-coin through one book top, with fees."""
    if q == 0:
        return LegResult(ZERO, ZERO, ZERO, ZERO, ZERO if rates else None)
    executable = executable_quantity(dir, q, top)
    if executable < dir.listing.min_qty or executable == 0:
        raise BelowMinimumError(
            f"{dir.listing.symbol}: executable quantity {executable} below "
            f"minimum {dir.listing.min_qty}"
        )
    gross = leg_output(dir, q, top)
    left_over = residual(dir, q, top)
    fee_amount = gross * fee.rate(role)
    fee_bnb = None
    if rates is not None:
        fee_bnb = fee_amount * rates.rate(dir.to)
    net = gross if fee.pay_in_bnb else gross - fee_amount
    return LegResult(gross, fee_amount, net, left_over, fee_bnb)


def bnb_rate(coin: Coin | str, rates: BnbRates) -> Decimal:
    """Last traded BNB conversion rate for a coin (1 for BNB itself)."""
    return rates.rate(coin)
