"""Shared builders for tests: tiny universes, book tops, fee models."""

from decimal import Decimal

import pytest

from arblens import BookTop, Coin, FeeModel, PairListing, Universe
from arblens.numeric import D


def listing(
    symbol: str,
    base: str,
    quote: str,
    dx: str = "0.001",
    min_qty: str = "0",
    max_qty: str = "100000",
    price_inc: str = "0.000001",
    min_price: str = "0",
    max_price: str = "100000",
) -> PairListing:
    return PairListing(
        symbol=symbol,
        base=Coin.of(base),
        quote=Coin.of(quote),
        qty_increment=D(dx),
        min_qty=D(min_qty),
        max_qty=D(max_qty),
        price_increment=D(price_inc),
        min_price=D(min_price),
        max_price=D(max_price),
    )


def top(bid=None, bid_qty=None, ask=None, ask_qty=None, ts=0) -> BookTop:
    conv = lambda v: None if v is None else D(str(v)) if not isinstance(v, Decimal) else v
    return BookTop(conv(bid), conv(bid_qty), conv(ask), conv(ask_qty), ts)


@pytest.fixture
def ethbtc_universe() -> Universe:
    # The ETH/BTC listing from the exchange example: 0.001 lots, 1e-6 prices.
    return Universe(
        [listing("ETHBTC", "ETH", "BTC", dx="0.001", min_qty="0.001")]
    )


@pytest.fixture
def lowest_tier_fees() -> FeeModel:
    return FeeModel(
        maker_bps=D("1.2"), taker_bps=D("2.4"), bnb_flat=D("5E-4"), pay_in_bnb=False
    )


def listing_dict(symbol, base, quote, dx="0.001", min_qty="0.001") -> dict:
    return {
        "symbol": symbol,
        "base": base,
        "quote": quote,
        "qty_increment": dx,
        "min_qty": min_qty,
        "max_qty": "100000000",
        "price_increment": "0.00000001",
        "min_price": "0.00000001",
        "max_price": "100000000",
    }


def scenario_market() -> tuple[list[dict], dict[str, str]]:
    """Listings + mid prices used by planted-scenario tests.

    Planted families run on BTC/ETH/XRP (with LTC as a partial-exit coin);
    noise runs on pairs whose coins touch nothing else.
    """
    listings = [
        listing_dict("ETHBTC", "ETH", "BTC"),
        listing_dict("ETHXRP", "ETH", "XRP"),
        listing_dict("XRPBTC", "XRP", "BTC"),
        listing_dict("ETHLTC", "ETH", "LTC"),
        listing_dict("LTCXRP", "LTC", "XRP"),
        # a second planted family, coin-disjoint from the first
        listing_dict("ADABNB", "ADA", "BNB"),
        listing_dict("ADASOL", "ADA", "SOL"),
        listing_dict("SOLBNB", "SOL", "BNB"),
        # noise pairs: each uses its own two coins
        listing_dict("NAANAB", "NAA", "NAB"),
        listing_dict("NBANBB", "NBA", "NBB"),
        listing_dict("NCANCB", "NCA", "NCB"),
    ]
    mids = {
        "ETHBTC": "0.02",
        "ETHXRP": "60",
        "XRPBTC": "0.00033333",
        "ETHLTC": "300",
        "LTCXRP": "0.1999",
        "ADABNB": "0.05",
        "ADASOL": "0.4",
        "SOLBNB": "0.125",
        "NAANAB": "1.5",
        "NBANBB": "0.7",
        "NCANCB": "12",
    }
    return listings, mids
