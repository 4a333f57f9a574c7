"""Market domain types: coins, pair listings, book tops, fees, BNB rates.

The listing universe is the ground truth for how a conversion between two
coins maps onto an exchange pair (which coin is base, which increments
apply). A ``Direction`` resolves one conversion ``from -> to`` against a
listing together with its orientation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .errors import InvalidPriceError, MissingRateError, UnlistedPairError
from .numeric import D, ONE, div

__all__ = [
    "AnchorClass",
    "Coin",
    "PairListing",
    "Orientation",
    "Direction",
    "BookTop",
    "BookLevels",
    "FeeModel",
    "Role",
    "BnbRates",
    "Universe",
    "load_listings",
    "DEFAULT_STABLE_COINS",
]


class AnchorClass(str, Enum):
    BTC = "BTC"
    BNB = "BNB"
    ALTS = "ALTS"
    STABLE = "STABLE"
    NONE = "NONE"


# Default classification: BTC and BNB are their own classes, the three
# high-cap alts form ALTS, and the common fiat-pegged coins are STABLE.
DEFAULT_ALT_COINS = frozenset({"ETH", "XRP", "TRX"})
DEFAULT_STABLE_COINS = frozenset(
    {"USDT", "USDC", "BUSD", "TUSD", "PAX", "USDS", "DAI"}
)


def classify_anchor(symbol: str) -> AnchorClass:
    if symbol == "BTC":
        return AnchorClass.BTC
    if symbol == "BNB":
        return AnchorClass.BNB
    if symbol in DEFAULT_ALT_COINS:
        return AnchorClass.ALTS
    if symbol in DEFAULT_STABLE_COINS:
        return AnchorClass.STABLE
    return AnchorClass.NONE


@dataclass(frozen=True, slots=True)
class Coin:
    symbol: str
    anchor_class: AnchorClass = AnchorClass.NONE

    @property
    def is_anchor(self) -> bool:
        return self.anchor_class is not AnchorClass.NONE

    @classmethod
    def of(cls, symbol: str) -> "Coin":
        return cls(symbol, classify_anchor(symbol))


@dataclass(frozen=True, slots=True)
class PairListing:
    """One tradable pair as listed: quantities quoted in the base asset."""

    symbol: str
    base: Coin
    quote: Coin
    qty_increment: Decimal
    min_qty: Decimal
    max_qty: Decimal
    price_increment: Decimal
    min_price: Decimal
    max_price: Decimal

    def __post_init__(self):
        if self.qty_increment <= 0:
            raise InvalidPriceError(f"{self.symbol}: qty_increment must be > 0")
        if self.price_increment <= 0:
            raise InvalidPriceError(f"{self.symbol}: price_increment must be > 0")
        if self.min_qty > self.max_qty:
            raise InvalidPriceError(f"{self.symbol}: min_qty > max_qty")
        if self.min_price > self.max_price:
            raise InvalidPriceError(f"{self.symbol}: min_price > max_price")
        if self.min_qty > 0 and self.min_qty % self.qty_increment != 0:
            raise InvalidPriceError(
                f"{self.symbol}: min_qty must be a multiple of qty_increment"
            )


class Orientation(Enum):
    # from-coin is the quote asset of the listing (to/from is listed)
    FROM_IS_QUOTE = "FROM_IS_QUOTE"
    # from-coin is the base asset of the listing (from/to is listed)
    FROM_IS_BASE = "FROM_IS_BASE"


@dataclass(frozen=True, slots=True)
class Direction:
    """A conversion from one coin to another over a concrete listing."""

    frm: Coin
    to: Coin
    listing: PairListing
    orientation: Orientation

    def __post_init__(self):
        pair_coins = {self.listing.base.symbol, self.listing.quote.symbol}
        if {self.frm.symbol, self.to.symbol} != pair_coins:
            raise UnlistedPairError(
                f"direction {self.frm.symbol}->{self.to.symbol} does not match "
                f"listing {self.listing.symbol}"
            )

    def reversed(self) -> "Direction":
        flipped = (
            Orientation.FROM_IS_BASE
            if self.orientation is Orientation.FROM_IS_QUOTE
            else Orientation.FROM_IS_QUOTE
        )
        return Direction(self.to, self.frm, self.listing, flipped)


@dataclass(frozen=True, slots=True)
class BookTop:
    """Best bid/ask of one listed pair at an instant. Missing side -> None."""

    bid_price: Decimal | None = None
    bid_qty: Decimal | None = None
    ask_price: Decimal | None = None
    ask_qty: Decimal | None = None
    timestamp: int = 0

    def __post_init__(self):
        if (
            self.bid_price is not None
            and self.ask_price is not None
            and self.bid_price > self.ask_price
        ):
            raise InvalidPriceError("crossed top: bid above ask")
        for qty in (self.bid_qty, self.ask_qty):
            if qty is not None and qty < 0:
                raise InvalidPriceError("negative book quantity")


@dataclass(frozen=True, slots=True)
class BookLevels:
    """Full depth for one pair; level 0 equals the BookTop."""

    bids: tuple[tuple[Decimal, Decimal], ...] = ()
    asks: tuple[tuple[Decimal, Decimal], ...] = ()
    timestamp: int = 0

    def __post_init__(self):
        for i in range(1, len(self.bids)):
            if self.bids[i][0] >= self.bids[i - 1][0]:
                raise InvalidPriceError("bids must be strictly decreasing in price")
        for i in range(1, len(self.asks)):
            if self.asks[i][0] <= self.asks[i - 1][0]:
                raise InvalidPriceError("asks must be strictly increasing in price")

    def top(self) -> BookTop:
        bid = self.bids[0] if self.bids else (None, None)
        ask = self.asks[0] if self.asks else (None, None)
        return BookTop(bid[0], bid[1], ask[0], ask[1], self.timestamp)

    def level_ratio(self, orientation: Orientation, h: int) -> Decimal:
        """Exchange ratio at book level ``h`` (0 = top)."""
        if orientation is Orientation.FROM_IS_QUOTE:
            return div(ONE, self.asks[h][0])
        return self.bids[h][0]

    def level_capacity(self, orientation: Orientation, h: int) -> Decimal:
        """Capacity of level ``h`` in from-coin terms."""
        if orientation is Orientation.FROM_IS_QUOTE:
            price, qty = self.asks[h]
            return price * qty
        return self.bids[h][1]


class Role(Enum):
    MAKER = "MAKER"
    TAKER = "TAKER"


@dataclass(frozen=True, slots=True)
class FeeModel:
    """Maker/taker bps rates plus the flat BNB-settled rate.

    Defaults are the lowest published tier (1.2 bps maker / 2.4 bps taker)
    and the flat 5e-4 used when the gain/proceeds formulas value fees in
    BNB. Neither is canonical; callers pick what a run assumes.
    """

    maker_bps: Decimal = Decimal("1.2")
    taker_bps: Decimal = Decimal("2.4")
    bnb_flat: Decimal = Decimal("5E-4")
    pay_in_bnb: bool = True

    def __post_init__(self):
        if self.maker_bps < 0 or self.taker_bps < 0 or self.bnb_flat < 0:
            raise InvalidPriceError("fee rates must be >= 0")
        if self.maker_bps > self.taker_bps:
            raise InvalidPriceError("maker rate must not exceed taker rate")

    def rate(self, role: Role) -> Decimal:
        bps = self.maker_bps if role is Role.MAKER else self.taker_bps
        return bps * Decimal("1E-4")


class BnbRates:
    """Last traded BNB conversion rates, keyed by coin.

    Entries hold the raw last price together with the listing orientation;
    the resolved rate is the reciprocal when BNB is the base asset of the
    listing. BNB itself always maps to 1.
    """

    def __init__(self, entries: Mapping[str, tuple[Decimal, bool]] | None = None):
        # entries: coin symbol -> (last price, bnb_is_base)
        self._entries: dict[str, tuple[Decimal, bool]] = dict(entries or {})
        for sym, (price, _) in self._entries.items():
            if price <= 0:
                raise InvalidPriceError(f"BNB rate for {sym} must be > 0")

    @classmethod
    def direct(cls, rates: Mapping[str, Decimal]) -> "BnbRates":
        """Build from already-resolved rates (coin/BNB orientation)."""
        return cls({sym: (D(r), False) for sym, r in rates.items()})

    def set_last_price(self, coin: str, price: Decimal, bnb_is_base: bool) -> None:
        if price <= 0:
            raise InvalidPriceError(f"BNB rate for {coin} must be > 0")
        self._entries[coin] = (price, bnb_is_base)

    def rate(self, coin: Coin | str) -> Decimal:
        symbol = coin.symbol if isinstance(coin, Coin) else coin
        if symbol == "BNB":
            return ONE
        try:
            price, bnb_is_base = self._entries[symbol]
        except KeyError:
            raise MissingRateError(f"no BNB rate for {symbol}") from None
        return div(ONE, price) if bnb_is_base else price


class Universe:
    """The set of listed pairs plus coin metadata and direction resolution."""

    def __init__(self, listings: Iterable[PairListing]):
        self.listings: dict[str, PairListing] = {}
        self._by_coins: dict[tuple[str, str], PairListing] = {}
        self.coins: dict[str, Coin] = {}
        for listing in listings:
            if listing.symbol in self.listings:
                raise InvalidPriceError(f"duplicate listing {listing.symbol}")
            key = (listing.base.symbol, listing.quote.symbol)
            if key in self._by_coins:
                raise InvalidPriceError(f"duplicate pair {key[0]}/{key[1]}")
            self.listings[listing.symbol] = listing
            self._by_coins[key] = listing
            self.coins.setdefault(listing.base.symbol, listing.base)
            self.coins.setdefault(listing.quote.symbol, listing.quote)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.listings

    def __iter__(self) -> Iterator[PairListing]:
        return iter(self.listings.values())

    def coin(self, symbol: str) -> Coin:
        try:
            return self.coins[symbol]
        except KeyError:
            raise UnlistedPairError(f"unknown coin {symbol}") from None

    def listing_between(self, a: str, b: str) -> PairListing | None:
        return self._by_coins.get((a, b)) or self._by_coins.get((b, a))

    def direction(self, frm: str, to: str) -> Direction:
        """Resolve the conversion frm->to to a listing + orientation."""
        listing = self._by_coins.get((frm, to))
        if listing is not None:
            return Direction(listing.base, listing.quote, listing, Orientation.FROM_IS_BASE)
        listing = self._by_coins.get((to, frm))
        if listing is not None:
            return Direction(listing.quote, listing.base, listing, Orientation.FROM_IS_QUOTE)
        raise UnlistedPairError(f"no listing between {frm} and {to}")


def load_listings(source) -> Universe:
    """Load the pair universe from a JSON array of listing objects.

    Each object carries: symbol, base, quote, qty_increment, min_qty,
    max_qty, price_increment, min_price, max_price. Numeric fields are
    decimal strings (or JSON numbers, parsed exactly from their literal).
    """
    if hasattr(source, "read"):
        raw = json.load(source, parse_float=Decimal, parse_int=Decimal)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh, parse_float=Decimal, parse_int=Decimal)
    listings = []
    for obj in raw:
        listings.append(
            PairListing(
                symbol=str(obj["symbol"]),
                base=Coin.of(str(obj["base"])),
                quote=Coin.of(str(obj["quote"])),
                qty_increment=D(obj["qty_increment"]),
                min_qty=D(obj["min_qty"]),
                max_qty=D(obj["max_qty"]),
                price_increment=D(obj["price_increment"]),
                min_price=D(obj["min_price"]),
                max_price=D(obj["max_price"]),
            )
        )
    return Universe(listings)


def dump_listings(universe: Universe) -> list[dict]:
    """Inverse of load_listings, for embedding universes in scenario specs."""
    out = []
    for listing in universe:
        out.append(
            {
                "symbol": listing.symbol,
                "base": listing.base.symbol,
                "quote": listing.quote.symbol,
                "qty_increment": str(listing.qty_increment),
                "min_qty": str(listing.min_qty),
                "max_qty": str(listing.max_qty),
                "price_increment": str(listing.price_increment),
                "min_price": str(listing.min_price),
                "max_price": str(listing.max_price),
            }
        )
    return out
