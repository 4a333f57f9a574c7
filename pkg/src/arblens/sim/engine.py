"""Deterministic price-time-priority matching engine.

One engine instance hosts every listed pair of a universe, assigns a single
globally increasing trade id stream, and emits trade records in the
exchange log schema (id, exchange, symbol, date, price, amount, sell) plus
hidden ownership fields used only for ground-truth labeling. The sell flag
is pinned to aggressor semantics: true iff the taker sold the base asset.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum

from ..errors import InvalidOrderError, NoLiquidityError, OrderRejectedError
from ..market import FeeModel, PairListing, Role, Universe
from ..numeric import ZERO

__all__ = ["Side", "OrderType", "Order", "SimTrade", "SnapshotRow", "MatchingEngine"]

EXCHANGE_ID = "sim"


class Side(Enum):
    BUY = "BUY"
    SELL = "SELL"


class OrderType(Enum):
    LIMIT = "LIMIT"
    MARKET = "MARKET"
    LIMIT_MAKER = "LIMIT_MAKER"


@dataclass(frozen=True, slots=True)
class Order:
    order_id: int
    symbol: str
    side: Side
    type: OrderType
    qty: Decimal
    price: Decimal | None = None  # absent for MARKET
    timestamp: int = 0
    owner: str = ""
    tag: str | None = None


@dataclass(frozen=True, slots=True)
class SimTrade:
    """One fill: the public log row plus hidden ground-truth fields."""

    id: int
    exchange: str
    symbol: str
    date: int
    price: Decimal
    amount: Decimal
    sell: bool
    maker_owner: str = ""
    taker_owner: str = ""
    maker_tag: str | None = None
    taker_tag: str | None = None
    maker_fee: Decimal = ZERO
    taker_fee: Decimal = ZERO


@dataclass(frozen=True, slots=True)
class SnapshotRow:
    symbol: str
    date: int
    type: str  # "bid" | "ask"
    amount: Decimal
    price: Decimal


@dataclass(slots=True)
class _Resting:
    order_id: int
    qty: Decimal
    owner: str
    tag: str | None


class _Book:
    """One pair's book: price levels are FIFO queues, prices kept sorted."""

    def __init__(self, listing: PairListing):
        self.listing = listing
        self.bids: dict[Decimal, deque[_Resting]] = {}
        self.asks: dict[Decimal, deque[_Resting]] = {}
        self.bid_prices: list[Decimal] = []  # ascending; best bid is last
        self.ask_prices: list[Decimal] = []  # ascending; best ask is first

    def best_bid(self) -> Decimal | None:
        return self.bid_prices[-1] if self.bid_prices else None

    def best_ask(self) -> Decimal | None:
        return self.ask_prices[0] if self.ask_prices else None

    def rest(self, side: Side, price: Decimal, entry: _Resting) -> None:
        levels, prices = (
            (self.bids, self.bid_prices) if side is Side.BUY else (self.asks, self.ask_prices)
        )
        if price not in levels:
            levels[price] = deque()
            bisect.insort(prices, price)
        levels[price].append(entry)

    def drop_if_empty(self, side: Side, price: Decimal) -> None:
        levels, prices = (
            (self.bids, self.bid_prices) if side is Side.BUY else (self.asks, self.ask_prices)
        )
        if price in levels and not levels[price]:
            del levels[price]
            idx = bisect.bisect_left(prices, price)
            prices.pop(idx)

    def depth(self, side: Side) -> list[tuple[Decimal, Decimal]]:
        """(price, total qty) per level, best first."""
        if side is Side.BUY:
            return [
                (p, sum(r.qty for r in self.bids[p]))
                for p in reversed(self.bid_prices)
            ]
        return [(p, sum(r.qty for r in self.asks[p])) for p in self.ask_prices]


class MatchingEngine:
    """All books of a universe plus the global trade id counter."""

    def __init__(self, universe: Universe, fees: FeeModel | None = None):
        self.universe = universe
        self.fees = fees or FeeModel()
        self.books: dict[str, _Book] = {
            sym: _Book(listing) for sym, listing in universe.listings.items()
        }
        self.trades: list[SimTrade] = []
        self._next_trade_id = 1
        self._last_date = 0

    # -- validation ----------------------------------------------------

    def _validate(self, order: Order, listing: PairListing) -> None:
        if order.qty <= 0:
            raise InvalidOrderError(f"{order.symbol}: quantity must be > 0")
        if order.qty % listing.qty_increment != 0:
            raise InvalidOrderError(
                f"{order.symbol}: qty {order.qty} not a multiple of "
                f"{listing.qty_increment}"
            )
        if order.qty < listing.min_qty or order.qty > listing.max_qty:
            raise InvalidOrderError(f"{order.symbol}: qty {order.qty} out of range")
        if order.type is OrderType.MARKET:
            if order.price is not None:
                raise InvalidOrderError("MARKET orders carry no price")
            return
        if order.price is None:
            raise InvalidOrderError(f"{order.type.value} orders require a price")
        if order.price % listing.price_increment != 0:
            raise InvalidOrderError(
                f"{order.symbol}: price {order.price} not a multiple of "
                f"{listing.price_increment}"
            )
        if order.price < listing.min_price or order.price > listing.max_price:
            raise InvalidOrderError(f"{order.symbol}: price {order.price} out of range")

    # -- matching ------------------------------------------------------

    def submit_order(self, order: Order) -> list[SimTrade]:
        """Match an incoming order; returns the fills it produced as taker."""
        book = self.books.get(order.symbol)
        if book is None:
            raise InvalidOrderError(f"unknown symbol {order.symbol}")
        self._validate(order, book.listing)
        if order.timestamp < self._last_date:
            raise InvalidOrderError("orders must arrive in nondecreasing time")
        self._last_date = order.timestamp

        if order.type is OrderType.LIMIT_MAKER:
            crosses = (
                order.side is Side.BUY
                and book.best_ask() is not None
                and order.price >= book.best_ask()
            ) or (
                order.side is Side.SELL
                and book.best_bid() is not None
                and order.price <= book.best_bid()
            )
            if crosses:
                raise OrderRejectedError(
                    f"{order.symbol}: LIMIT_MAKER at {order.price} would cross"
                )
            book.rest(order.side, order.price, _Resting(order.order_id, order.qty, order.owner, order.tag))
            return []

        if order.type is OrderType.MARKET:
            opposite_empty = (
                book.best_ask() is None if order.side is Side.BUY else book.best_bid() is None
            )
            if opposite_empty:
                raise NoLiquidityError(f"{order.symbol}: empty book for MARKET order")

        fills = self._cross(book, order)
        remainder = order.qty - sum(f.amount for f in fills)
        if remainder > 0 and order.type is OrderType.LIMIT:
            book.rest(
                order.side,
                order.price,
                _Resting(order.order_id, remainder, order.owner, order.tag),
            )
        # MARKET remainder on an exhausted book is canceled silently.
        return fills

    def _cross(self, book: _Book, taker: Order) -> list[SimTrade]:
        fills: list[SimTrade] = []
        remaining = taker.qty
        is_buy = taker.side is Side.BUY
        while remaining > 0:
            best = book.best_ask() if is_buy else book.best_bid()
            if best is None:
                break
            if taker.type is not OrderType.MARKET:
                if is_buy and best > taker.price:
                    break
                if not is_buy and best < taker.price:
                    break
            queue = book.asks[best] if is_buy else book.bids[best]
            while queue and remaining > 0:
                maker = queue[0]
                fill_qty = min(remaining, maker.qty)
                fills.append(self._record_fill(book, taker, maker, best, fill_qty))
                maker.qty -= fill_qty
                remaining -= fill_qty
                if maker.qty == 0:
                    queue.popleft()
            book.drop_if_empty(Side.SELL if is_buy else Side.BUY, best)
        return fills

    def _record_fill(
        self, book: _Book, taker: Order, maker: _Resting, price: Decimal, qty: Decimal
    ) -> SimTrade:
        sell = taker.side is Side.SELL
        # Fees come out of each side's proceeds: base for the buyer of the
        # base asset, quote for its seller.
        taker_proceeds = qty * price if sell else qty
        maker_proceeds = qty if sell else qty * price
        trade = SimTrade(
            id=self._next_trade_id,
            exchange=EXCHANGE_ID,
            symbol=book.listing.symbol,
            date=taker.timestamp,
            price=price,
            amount=qty,
            sell=sell,
            maker_owner=maker.owner,
            taker_owner=taker.owner,
            maker_tag=maker.tag,
            taker_tag=taker.tag,
            maker_fee=maker_proceeds * self.fees.rate(Role.MAKER),
            taker_fee=taker_proceeds * self.fees.rate(Role.TAKER),
        )
        self._next_trade_id += 1
        self.trades.append(trade)
        return trade

    # -- snapshots -----------------------------------------------------

    def snapshot(self, date: int) -> list[SnapshotRow]:
        """Depth rows for every nonempty book side, bids then asks."""
        rows: list[SnapshotRow] = []
        for sym in sorted(self.books):
            book = self.books[sym]
            for price, qty in book.depth(Side.BUY):
                rows.append(SnapshotRow(sym, date, "bid", qty, price))
            for price, qty in book.depth(Side.SELL):
                rows.append(SnapshotRow(sym, date, "ask", qty, price))
        return rows

    def crossed(self) -> bool:
        """True if any book rests in a crossed state (must never happen)."""
        for book in self.books.values():
            bid, ask = book.best_bid(), book.best_ask()
            if bid is not None and ask is not None and bid >= ask:
                return True
        return False
