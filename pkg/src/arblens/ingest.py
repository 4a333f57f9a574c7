"""Loading and indexing trade logs, book snapshots, and fee schedules.

Trade files follow the exchange-log schema: id, exchange, symbol, date
(epoch ms), price, amount (base asset), sell flag. Ids are globally
monotone and are the ordering authority; multiple trades can share one
millisecond. Book snapshot files carry symbol, date, type (bid/ask),
amount, and price per level; the price column is required to reconstruct
levels even though quote depth is otherwise unavailable.

Everything numeric is parsed to exact decimals. Loaders work in one pass
and accept either a path or an open text stream, so logs larger than
memory can be consumed through ``iter_trades`` without materializing a
``TradeStream``.
"""

from __future__ import annotations

import csv
import json
import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Iterator

from .errors import (
    DuplicateIdError,
    InvalidScheduleError,
    ParseError,
    ScheduleRangeError,
    UnknownSymbolError,
)
from .market import BookLevels, FeeModel, Universe
from .numeric import D, ZERO, div, q8

__all__ = [
    "Trade",
    "TradeStream",
    "iter_trades",
    "load_trades",
    "write_trades",
    "SnapshotStream",
    "load_books",
    "PriceSource",
    "ReferencePrice",
    "reference_price",
    "FeeSchedule",
    "fee_at",
]

log = logging.getLogger("arblens")

TRADE_FIELDS = ["id", "exchange", "symbol", "date", "price", "amount", "sell"]
_TRUE = {"true", "1", "t", "yes"}
_FALSE = {"false", "0", "f", "no"}


@dataclass(frozen=True, slots=True)
class Trade:
    id: int
    exchange: str
    symbol: str
    date: int
    price: Decimal
    amount: Decimal
    sell: bool


def _parse_row(row: list[str], line: int) -> Trade:
    if len(row) != len(TRADE_FIELDS):
        raise ParseError(f"expected {len(TRADE_FIELDS)} columns, got {len(row)}", line)
    try:
        trade_id = int(row[0])
        date = int(row[3])
        price = D(row[4])
        amount = D(row[5])
    except (ValueError, InvalidOperation) as exc:
        raise ParseError(f"bad numeric field: {exc}", line) from None
    flag = row[6].strip().lower()
    if flag in _TRUE:
        sell = True
    elif flag in _FALSE:
        sell = False
    else:
        raise ParseError(f"bad sell flag {row[6]!r}", line)
    return Trade(trade_id, row[1], row[2], date, price, amount, sell)


def iter_trades(source, universe: Universe | None = None) -> Iterator[Trade]:
    """Stream trades from a CSV path or file object, validating as we go."""
    own = not hasattr(source, "read")
    fh = open(source, "r", encoding="utf-8", newline="") if own else source
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        if [h.strip() for h in header] != TRADE_FIELDS:
            raise ParseError(f"unexpected header {header!r}", 1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            trade = _parse_row(row, line_no)
            if universe is not None and trade.symbol not in universe.listings:
                raise UnknownSymbolError(f"unknown symbol {trade.symbol}", line_no)
            yield trade
    finally:
        if own:
            fh.close()


class TradeStream:
    """Trades ordered by id with per-symbol time indexes."""

    def __init__(self, trades: Iterable[Trade]):
        self.trades: list[Trade] = sorted(trades, key=lambda t: t.id)
        seen: set[int] = set()
        for t in self.trades:
            if t.id in seen:
                raise DuplicateIdError(f"duplicate trade id {t.id}")
            seen.add(t.id)
        self.by_symbol: dict[str, list[Trade]] = {}
        for t in self.trades:
            self.by_symbol.setdefault(t.symbol, []).append(t)
        self._dates: dict[str, list[int]] = {
            sym: [t.date for t in rows] for sym, rows in self.by_symbol.items()
        }
        self._symbol_ids: dict[str, list[int]] = {
            sym: [t.id for t in rows] for sym, rows in self.by_symbol.items()
        }
        self._ids: list[int] = [t.id for t in self.trades]

    def __len__(self) -> int:
        return len(self.trades)

    def __iter__(self) -> Iterator[Trade]:
        return iter(self.trades)

    def in_window(self, symbol: str, start: int, end: int) -> list[Trade]:
        """Trades on ``symbol`` with start <= date < end."""
        rows = self.by_symbol.get(symbol)
        if not rows:
            return []
        dates = self._dates[symbol]
        return rows[bisect_left(dates, start) : bisect_left(dates, end)]

    def next_on_symbol_after(self, symbol: str, trade_id: int) -> Trade | None:
        """First trade on ``symbol`` with id greater than ``trade_id``."""
        rows = self.by_symbol.get(symbol)
        if not rows:
            return None
        idx = bisect_right(self._symbol_ids[symbol], trade_id)
        return rows[idx] if idx < len(rows) else None

    def prev_on_symbol_before(self, symbol: str, trade_id: int) -> Trade | None:
        """Last trade on ``symbol`` with id smaller than ``trade_id``."""
        rows = self.by_symbol.get(symbol)
        if not rows:
            return None
        idx = bisect_left(self._symbol_ids[symbol], trade_id)
        return rows[idx - 1] if idx > 0 else None

    def by_id(self, trade_id: int) -> Trade | None:
        idx = bisect_left(self._ids, trade_id)
        if idx < len(self._ids) and self._ids[idx] == trade_id:
            return self.trades[idx]
        return None


def load_trades(source, universe: Universe | None = None) -> TradeStream:
    return TradeStream(iter_trades(source, universe))


def write_trades(stream: Iterable[Trade], path) -> None:
    """Canonical serialization; inverse of load_trades."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRADE_FIELDS) + "\n")
        for t in stream:
            sell = "true" if t.sell else "false"
            fh.write(
                f"{t.id},{t.exchange},{t.symbol},{t.date},{t.price},{t.amount},{sell}\n"
            )


# -- book snapshots ---------------------------------------------------------

SNAPSHOT_FIELDS = ["symbol", "date", "type", "amount", "price"]


class SnapshotStream:
    """Book snapshots grouped by (symbol, date), time-indexed per symbol."""

    def __init__(self, levels: dict[str, list[BookLevels]]):
        self.by_symbol = {

            sym: sorted(snaps, key=lambda s: s.timestamp)
            for sym, snaps in levels.items()
        }
        self._dates = {
            sym: [s.timestamp for s in snaps] for sym, snaps in self.by_symbol.items()
        }

    def nearest(self, symbol: str, t: int, tolerance_ms: int) -> BookLevels | None:
        """Closest snapshot within tolerance of ``t``, or None."""
        snaps = self.by_symbol.get(symbol)
        if not snaps:
            return None
        dates = self._dates[symbol]
        idx = bisect_left(dates, t)
        best = None
        for j in (idx - 1, idx):
            if 0 <= j < len(snaps):
                dist = abs(snaps[j].timestamp - t)
                if dist <= tolerance_ms and (best is None or dist < best[0]):
                    best = (dist, snaps[j])
        return best[1] if best else None

    def symbols(self) -> list[str]:
        return sorted(self.by_symbol)


def load_books(source, universe: Universe | None = None) -> SnapshotStream:
    """Parse snapshot CSV rows into per-(symbol, date) book levels.

    A crossed snapshot (best bid >= best ask) is kept but logged, since the
    file is a passthrough of observed data.
    """
    own = not hasattr(source, "read")
    fh = open(source, "r", encoding="utf-8", newline="") if own else source
    grouped: dict[tuple[str, int], dict[str, list[tuple[Decimal, Decimal]]]] = {}
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and [h.strip() for h in header] != SNAPSHOT_FIELDS:
            raise ParseError(f"unexpected header {header!r}", 1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SNAPSHOT_FIELDS):
                raise ParseError(
                    f"expected {len(SNAPSHOT_FIELDS)} columns, got {len(row)}", line_no
                )
            symbol, date_s, typ, amount_s, price_s = row
            if universe is not None and symbol not in universe.listings:
                raise UnknownSymbolError(f"unknown symbol {symbol}", line_no)
            if typ not in ("bid", "ask"):
                raise ParseError(f"bad side {typ!r}", line_no)
            try:
                date = int(date_s)
                amount = D(amount_s)
                price = D(price_s)
            except (ValueError, InvalidOperation) as exc:
                raise ParseError(f"bad numeric field: {exc}", line_no) from None
            grouped.setdefault((symbol, date), {"bid": [], "ask": []})[typ].append(
                (price, amount)
            )
    finally:
        if own:
            fh.close()

    by_symbol: dict[str, list[BookLevels]] = {}
    for (symbol, date), sides in sorted(grouped.items()):
        bids = sorted(sides["bid"], key=lambda pq: pq[0], reverse=True)
        asks = sorted(sides["ask"], key=lambda pq: pq[0])
        if bids and asks and bids[0][0] >= asks[0][0]:
            log.warning(
                "crossed book snapshot for %s at %d (bid %s >= ask %s)",
                symbol, date, bids[0][0], asks[0][0],
            )
        by_symbol.setdefault(symbol, []).append(
            BookLevels(bids=tuple(bids), asks=tuple(asks), timestamp=date)
        )
    return SnapshotStream(by_symbol)


# -- reference prices -------------------------------------------------------


class PriceSource(Enum):
    BOOK_TOP = "BOOK_TOP"
    VWAP = "VWAP"
    UNAVAILABLE = "UNAVAILABLE"


@dataclass(frozen=True, slots=True)
class ReferencePrice:
    symbol: str
    timestamp: int
    price: Decimal | None
    source: PriceSource


def reference_price(
    symbol: str,
    t: int,
    window_ms: int,
    trades: TradeStream | None,
    books: SnapshotStream | None = None,
    book_tolerance_ms: int = 100,
    side: str | None = None,
) -> ReferencePrice:
    """The trader's view of a pair's price just before time ``t``.

    A book snapshot within the match tolerance wins (``side`` picks bid,
    ask, or their midpoint); otherwise the volume-weighted average of
    trades in [t - window, t); otherwise UNAVAILABLE.
    """
    if window_ms <= 0:
        raise ValueError("window_ms must be > 0")
    if books is not None:
        snap = books.nearest(symbol, t, book_tolerance_ms)
        if snap is not None:
            top = snap.top()
            if side == "bid":
                price = top.bid_price
            elif side == "ask":
                price = top.ask_price
            else:
                if top.bid_price is not None and top.ask_price is not None:
                    price = div(top.bid_price + top.ask_price, D(2))
                else:
                    price = top.bid_price or top.ask_price
            if price is not None:
                return ReferencePrice(symbol, t, price, PriceSource.BOOK_TOP)
    if trades is not None:
        window = trades.in_window(symbol, t - window_ms, t)
        volume = sum((tr.amount for tr in window), ZERO)
        if volume > 0:
            notional = sum((tr.price * tr.amount for tr in window), ZERO)
            return ReferencePrice(symbol, t, q8(div(notional, volume)), PriceSource.VWAP)
    return ReferencePrice(symbol, t, None, PriceSource.UNAVAILABLE)


# -- fee schedules ----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FeeInterval:
    effective_from: int
    maker_bps: Decimal
    taker_bps: Decimal
    bnb_flat: Decimal


class FeeSchedule:
    """Time-ordered fee intervals; each runs until the next one starts."""

    def __init__(self, intervals: Iterable[FeeInterval]):
        self.intervals = sorted(intervals, key=lambda iv: iv.effective_from)
        for a, b in zip(self.intervals, self.intervals[1:]):
            if a.effective_from == b.effective_from:
                raise InvalidScheduleError(
                    f"two intervals start at {a.effective_from}"
                )
        if not self.intervals:
            raise InvalidScheduleError("empty fee schedule")
        self._starts = [iv.effective_from for iv in self.intervals]

    @classmethod
    def from_json(cls, source) -> "FeeSchedule":
        if hasattr(source, "read"):
            raw = json.load(source)
        else:
            with open(source, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        return cls(
            FeeInterval(
                effective_from=int(obj["effective_from"]),
                maker_bps=D(str(obj["maker_bps"])),
                taker_bps=D(str(obj["taker_bps"])),
                bnb_flat=D(str(obj.get("bnb_flat", "5E-4"))),
            )
            for obj in raw
        )

    @classmethod
    def constant(cls, fees: FeeModel, start: int = 0) -> "FeeSchedule":
        return cls(
            [FeeInterval(start, fees.maker_bps, fees.taker_bps, fees.bnb_flat)]
        )


def fee_at(t: int, schedule: FeeSchedule, pay_in_bnb: bool = True) -> FeeModel:
    """Fee rates in force at time ``t`` (half-open interval convention)."""
    idx = bisect_right(schedule._starts, t) - 1
    if idx < 0:
        raise ScheduleRangeError(
            f"{t} precedes schedule start {schedule._starts[0]}"
        )
    iv = schedule.intervals[idx]
    return FeeModel(
        maker_bps=iv.maker_bps,
        taker_bps=iv.taker_bps,
        bnb_flat=iv.bnb_flat,
        pay_in_bnb=pay_in_bnb,
    )
