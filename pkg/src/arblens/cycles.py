"""Cycle and conversion-path math: capacity, balances, gain, proceeds.

A cycle is a chain of conversions returning to its base coin; a conversion
path is the open-ended variant. Both are built over a ``BookSet`` that
bundles the listing universe with one ``BookTop`` per pair, because the
gain and proceeds formulas value residuals and fees through additional
pairs (from-coin back to the terminal coin, and BNB to the terminal coin).

Residual and fee valuation legs are only looked up when their contribution
is nonzero, so books for valuation pairs are required exactly when they
matter.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Mapping, Sequence

from .errors import (
    CapacityExceededError,
    InvalidComparisonError,
    MissingRateError,
    NoLiquidityError,
    UnlistedPairError,
)
from .market import BnbRates, BookTop, Coin, Direction, FeeModel, Universe
from .numeric import ONE, ZERO, div
from .ops import exchange_ratio, leg_output, pair_capacity, residual

__all__ = [
    "BookSet",
    "Cycle",
    "ConversionPath",
    "CycleClass",
    "GainBreakdown",
    "Verdict",
    "cycle_capacity",
    "cycle_balances",
    "cycle_gain",
    "conversion_proceeds",
    "compare_conversions",
    "enumerate_cycles",
    "CYCLE_BUCKETS",
]


class BookSet:
    """Listing universe plus one BookTop per pair symbol."""

    def __init__(self, universe: Universe, tops: Mapping[str, BookTop]):
        self.universe = universe
        self.tops = dict(tops)

    def top(self, symbol: str) -> BookTop:
        try:
            return self.tops[symbol]
        except KeyError:
            raise NoLiquidityError(f"no book for {symbol}") from None

    def ratio(self, frm: str, to: str) -> Decimal:
        """Top-of-book exchange ratio frm -> to; 1 for the identity."""
        if frm == to:
            return ONE
        direction = self.universe.direction(frm, to)
        return exchange_ratio(direction, self.top(direction.listing.symbol))


def _build_route(universe: Universe, coins: Sequence[str]) -> tuple[Direction, ...]:
    return tuple(
        universe.direction(coins[i], coins[i + 1]) for i in range(len(coins) - 1)
    )


@dataclass(frozen=True, slots=True)
class Cycle:
    """Ordered conversions c1 -> c2 -> ... -> cn -> c1."""

    directions: tuple[Direction, ...]

    def __post_init__(self):
        coins = self.coin_symbols()
        if len(coins) < 4 or coins[0] != coins[-1]:
            raise UnlistedPairError("cycle must close on its base coin")
        inner = coins[:-1]
        if len(set(inner)) != len(inner):
            raise UnlistedPairError("cycle must not repeat an intermediate coin")
        for a, b in zip(self.directions, self.directions[1:]):
            if a.to.symbol != b.frm.symbol:
                raise UnlistedPairError("cycle directions must chain")

    @classmethod
    def over(cls, universe: Universe, coins: Sequence[str]) -> "Cycle":
        if coins[0] != coins[-1]:
            coins = list(coins) + [coins[0]]
        return cls(_build_route(universe, coins))

    @property
    def base_coin(self) -> Coin:
        return self.directions[0].frm

    def coin_symbols(self) -> list[str]:
        return [self.directions[0].frm.symbol] + [d.to.symbol for d in self.directions]


@dataclass(frozen=True, slots=True)
class ConversionPath:
    """Ordered conversions c1 -> ... -> c_{n+1} over distinct coins."""

    directions: tuple[Direction, ...]

    def __post_init__(self):
        coins = self.coin_symbols()
        if len(set(coins)) != len(coins):
            raise UnlistedPairError("conversion path coins must be distinct")
        for a, b in zip(self.directions, self.directions[1:]):
            if a.to.symbol != b.frm.symbol:
                raise UnlistedPairError("path directions must chain")

    @classmethod
    def over(cls, universe: Universe, coins: Sequence[str]) -> "ConversionPath":
        return cls(_build_route(universe, coins))

    @property
    def source(self) -> Coin:
        return self.directions[0].frm

    @property
    def target(self) -> Coin:
        return self.directions[-1].to

    def coin_symbols(self) -> list[str]:
        return [self.directions[0].frm.symbol] + [d.to.symbol for d in self.directions]


def _route_capacity(directions: Sequence[Direction], books: BookSet) -> Decimal:
    """min over legs of capacity pulled back to first-coin terms."""
    best: Decimal | None = None
    ratio_product = ONE
    for direction in directions:
        top = books.top(direction.listing.symbol)
        eta = pair_capacity(direction, top)
        candidate = div(eta, ratio_product)
        if best is None or candidate < best:
            best = candidate
        ratio_product *= exchange_ratio(direction, top)
    assert best is not None
    return best


def cycle_capacity(cycle: Cycle, books: BookSet) -> Decimal:
    """Maximum base-coin quantity pushable through every leg's book top."""
    return _route_capacity(cycle.directions, books)


def path_capacity(path: ConversionPath, books: BookSet) -> Decimal:
    return _route_capacity(path.directions, books)


def _route_balances(
    q0: Decimal, directions: Sequence[Direction], books: BookSet
) -> tuple[list[Decimal], list[Decimal]]:
    """Balance recurrence; returns ([q1..q_{n+1}], [r1(q1)..rn(qn)]).

    q1 strips the first leg's residual up front, so r1(q1) is exactly zero;
    the stranded part of the initial quantity never enters the route.
    """
    first = directions[0]
    q1 = q0 - residual(first, q0, books.top(first.listing.symbol))
    balances: list[Decimal] = [q1]
    residuals: list[Decimal] = []
    for i, direction in enumerate(directions):
        top = books.top(direction.listing.symbol)
        q_in = balances[i]
        residuals.append(residual(direction, q_in, top))
        balances.append(leg_output(direction, q_in, top))
    return balances, residuals


def cycle_balances(Q: Decimal, cycle: Cycle, books: BookSet) -> list[Decimal]:
    """Per-coin balances [q1, ..., q_{n+1}] for base quantity Q."""
    if Q < 0:
        raise CapacityExceededError("quantity must be >= 0")
    if Q > cycle_capacity(cycle, books):
        raise CapacityExceededError(f"{Q} exceeds cycle capacity")
    balances, _ = _route_balances(Q, cycle.directions, books)
    return balances


class CycleClass(Enum):
    ARBITRAGE_FREE = "ARBITRAGE_FREE"  # gain <= 0
    OPEN = "OPEN"  # gain > 0


@dataclass(frozen=True, slots=True)
class GainBreakdown:
    gross_delta: Decimal
    residual_value: Decimal
    fee_value: Decimal
    gain: Decimal
    classification: CycleClass


def _valuation_ratio(books: BookSet, frm: str, to: str) -> Decimal:
    try:
        return books.ratio(frm, to)
    except (UnlistedPairError, NoLiquidityError) as exc:
        raise MissingRateError(str(exc)) from exc


def _residual_value(
    residuals: Sequence[Decimal],
    directions: Sequence[Direction],
    terminal: str,
    books: BookSet,
) -> Decimal:
    total = ZERO
    for r, direction in zip(residuals, directions):
        if r == 0:
            continue
        total += r * _valuation_ratio(books, direction.frm.symbol, terminal)
    return total


def _fee_value(
    balances: Sequence[Decimal],
    directions: Sequence[Direction],
    terminal: str,
    books: BookSet,
    rates: BnbRates,
    fee: FeeModel,
) -> Decimal:
    if fee.bnb_flat == 0:
        return ZERO
    psi_b = _valuation_ratio(books, "BNB", terminal)
    total = ZERO
    for i, direction in enumerate(directions):
        q_next = balances[i + 1]
        total += q_next * rates.rate(direction.to)
    return fee.bnb_flat * total * psi_b


def cycle_gain(
    Q: Decimal,
    cycle: Cycle,
    books: BookSet,
    rates: BnbRates,
    fee: FeeModel,
) -> GainBreakdown:
    """Gain/loss of pushing Q through the cycle, in base-coin terms.

    gain = (q_{n+1} - q_1) + residual value - fee value, where residuals are
    valued through each from-coin's pair back to the base coin and fees are
    the flat BNB-settled rate on every leg's proceeds.
    """
    if Q > cycle_capacity(cycle, books):
        raise CapacityExceededError(f"{Q} exceeds cycle capacity")
    balances, residuals = _route_balances(Q, cycle.directions, books)
    base = cycle.base_coin.symbol
    gross_delta = balances[-1] - balances[0]
    residual_value = _residual_value(residuals, cycle.directions, base, books)
    fee_value = _fee_value(balances, cycle.directions, base, books, rates, fee)
    gain = gross_delta + residual_value - fee_value
    cls = CycleClass.OPEN if gain > 0 else CycleClass.ARBITRAGE_FREE
    return GainBreakdown(gross_delta, residual_value, fee_value, gain, cls)


def conversion_proceeds(
    q: Decimal,
    path: ConversionPath,
    books: BookSet,
    rates: BnbRates,
    fee: FeeModel,
) -> Decimal:
    """Terminal-coin proceeds of converting q through the path.

    Terminal balance plus residuals valued in terminal-coin terms, minus
    BNB-settled fees valued in terminal-coin terms.
    """
    if q > path_capacity(path, books):
        raise CapacityExceededError(f"{q} exceeds path capacity")
    balances, residuals = _route_balances(q, path.directions, books)
    terminal = path.target.symbol
    residual_value = _residual_value(residuals, path.directions, terminal, books)
    fee_value = _fee_value(balances, path.directions, terminal, books, rates, fee)
    return balances[-1] + residual_value - fee_value


@dataclass(frozen=True, slots=True)
class Verdict:
    q_used: Decimal
    pr1: Decimal
    pr2: Decimal
    v1_profitable: bool


def compare_conversions(
    v1: ConversionPath,
    v2: ConversionPath,
    books: BookSet,
    rates: BnbRates,
    fee: FeeModel,
) -> Verdict:
    """Is v1 strictly more profitable than v2 at their common capacity?"""
    if (v1.source.symbol, v1.target.symbol) != (v2.source.symbol, v2.target.symbol):
        raise InvalidComparisonError(
            f"paths {v1.coin_symbols()} and {v2.coin_symbols()} do not share endpoints"
        )
    q = min(path_capacity(v1, books), path_capacity(v2, books))
    pr1 = conversion_proceeds(q, v1, books, rates, fee)
    pr2 = conversion_proceeds(q, v2, books, rates, fee)
    return Verdict(q, pr1, pr2, pr1 > pr2)


CYCLE_BUCKETS = ("BTC", "BNB", "ALTS", "STABLE", "OTHER")


def enumerate_cycles(
    universe: Universe, n: int = 3
) -> tuple[list[Cycle], dict[str, int]]:
    """All ordered triangular cycles over the universe, plus a census.

    Counts are bucketed by the base coin's anchor class; every ordered
    rotation/orientation counts separately (three coins fully listed yield
    six cycles).
    """
    if n != 3:
        raise ValueError("only triangular (n=3) enumeration is supported")
    counts = {bucket: 0 for bucket in CYCLE_BUCKETS}
    counts["TOTAL"] = 0
    cycles: list[Cycle] = []
    symbols = sorted(universe.coins)
    for a in symbols:
        for b in symbols:
            if b == a or universe.listing_between(a, b) is None:
                continue
            for c in symbols:
                if c in (a, b):
                    continue
                if universe.listing_between(b, c) is None:
                    continue
                if universe.listing_between(c, a) is None:
                    continue
                cycles.append(Cycle.over(universe, [a, b, c, a]))
                coin = universe.coin(a)
                bucket = coin.anchor_class.value if coin.is_anchor else "OTHER"
                counts[bucket] += 1
                counts["TOTAL"] += 1
    return cycles, counts
