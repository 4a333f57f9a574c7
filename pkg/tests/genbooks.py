"""Seeded random triangular-market generator shared by unit and acceptance
tests.

Orientation of every listing is randomized. Prices on quote-oriented legs
are drawn from reciprocal-exact values (2^a * 5^b * 10^k) so that closed
forms stay exact; base-oriented legs use arbitrary 4-decimal prices.
"""

import random
from decimal import Decimal

from arblens import BookSet, BookTop, Cycle, FeeModel, Universe
from arblens.market import BnbRates
from arblens.numeric import D
from conftest import listing

RECIPROCAL_EXACT = [
    D("0.1"), D("0.2"), D("0.25"), D("0.4"), D("0.5"), D("0.8"),
    D("1"), D("1.25"), D("2"), D("2.5"), D("4"), D("5"), D("8"), D("10"),
]
INCREMENTS = [D("0.00000001"), D("0.00001"), D("0.001")]


def _price(rng: random.Random, quote_oriented: bool) -> Decimal:
    if quote_oriented:
        return rng.choice(RECIPROCAL_EXACT)
    return D(f"{rng.randint(1000, 99999)}") * D("0.0001")


def _qty(rng: random.Random) -> Decimal:
    return D(f"{rng.randint(100, 100000)}") * D("0.01")


def random_triangle(rng: random.Random, zero_spread=False, force_dx=None):
    """One random three-coin market plus its BNB valuation legs.

    Returns (cycle, books, rates, fee) with the flat BNB fee drawn from a
    small set and per-coin BNB rates always present. ``zero_spread`` plus a
    vanishing ``force_dx`` makes every ratio and balance an exact decimal.
    """
    coins = ["AAA", "BBB", "CCC"]
    legs = [("AAA", "BBB"), ("BBB", "CCC"), ("CCC", "AAA")]
    listings = []
    tops = {}
    for frm, to in legs:
        from_is_base = rng.random() < 0.5
        base, quote = (frm, to) if from_is_base else (to, frm)
        sym = base + quote
        dx = force_dx if force_dx is not None else rng.choice(INCREMENTS)
        listings.append(listing(sym, base, quote, dx=str(dx)))
        price = _price(rng, quote_oriented=not from_is_base)
        if zero_spread:
            spread = D("0")
        else:
            spread = D(f"{rng.randint(0, 50)}") * D("0.000001")
        tops[sym] = BookTop(price, _qty(rng), price + spread, _qty(rng), 0)
    # BNB legs used to value fees back in terminal-coin terms
    for coin in coins:
        sym = "BNB" + coin
        listings.append(listing(sym, "BNB", coin, dx="0.001"))
        bnb_price = _price(rng, quote_oriented=False)
        tops[sym] = BookTop(bnb_price, _qty(rng), bnb_price, _qty(rng), 0)
    universe = Universe(listings)
    cycle = Cycle.over(universe, ["AAA", "BBB", "CCC", "AAA"])
    books = BookSet(universe, tops)
    rates = BnbRates.direct(
        {c: rng.choice(RECIPROCAL_EXACT) for c in coins} | {"BNB": D("1")}
    )
    flat = rng.choice([D("0"), D("5E-4"), D("2.4E-4"), D("1E-3")])
    fee = FeeModel(maker_bps=D("1.2"), taker_bps=D("2.4"), bnb_flat=flat)
    return cycle, books, rates, fee
