"""Detection of triangular and two-leg conversion sequences in trade logs.

Every trade is read as a directed conversion: the sell flag gives the
aggressor's side, so a trade with sell=true converts base to quote and one
with sell=false converts quote to base. Chaining by these directions makes
every detected leg liquidity-taking by construction; a leg the trader
rested as a maker prints with the opposite direction and cannot chain.

Matching works in two phases so that sharded runs reproduce the sequential
result byte for byte: phase one enumerates every candidate chain closure
inside the latency window, phase two accepts candidates in closing-trade
order, greedily and deterministically, ensuring no trade joins two
sequences. Triangular detection runs first and consumes its trades;
two-leg detection runs on the remainder.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Iterable, Sequence

from .errors import InvalidPairingError, UnlistedPairError
from .ingest import (
    FeeSchedule,
    PriceSource,
    ReferencePrice,
    SnapshotStream,
    Trade,
    TradeStream,
    fee_at,
    reference_price,
)
from .market import FeeModel, Orientation, PairListing, Role, Universe
from .numeric import D, ONE, div, q8

__all__ = [
    "DetectorConfig",
    "DetectedSequence",
    "trade_conversion",
    "common_coin_qty",
    "quantities_match",
    "detect_triangular",
    "detect_indirect",
    "net_improvement_bps",
    "conversion_profitability",
    "attach_profitability",
]

TEN_K = D("1E4")


@dataclass(frozen=True)
class DetectorConfig:
    delta_t_ms: int = 50
    competition_window_ms: int = 100
    exit_window_ms: int = 100
    max_subset_candidates: int = 20
    vwap_window_ms: int = 50
    book_tolerance_ms: int = 100
    require_anchor_base: bool = True

    def __post_init__(self):
        for name in ("delta_t_ms", "competition_window_ms", "exit_window_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def trade_conversion(trade: Trade, listing: PairListing) -> tuple[str, str]:
    """(from_coin, to_coin) of the trade's taker."""
    if trade.sell:
        return listing.base.symbol, listing.quote.symbol
    return listing.quote.symbol, listing.base.symbol


def common_coin_qty(trade: Trade, listing: PairListing, coin: str) -> Decimal:
    """The trade's quantity expressed in ``coin`` terms.

    Base-asset quantities pass through; quote-side quantities are amount
    times price, per the four listing translation rows.
    """
    if listing.base.symbol == coin:
        return trade.amount
    return trade.amount * trade.price


def _tolerance_dx(listing_b: PairListing, trade_b: Trade, common: str) -> Decimal:
    """One downstream quantity increment, translated to common-coin terms."""
    dx = listing_b.qty_increment
    if listing_b.base.symbol == common:
        return dx
    return dx * trade_b.price


def quantities_match(
    a: Trade,
    b: Trade,
    universe: Universe,
    fee: FeeModel,
    tolerance_increments: int = 1,
) -> tuple[bool, Decimal]:
    """Do consecutive conversions pass the same quantity through their
    common coin, up to fees and one rounding residue?

    Returns (matched, diff) with diff = upstream minus downstream quantity
    in common-coin terms. The acceptance interval is asymmetric,
    [-dx, q*taker_fee + dx]: fees only ever shrink the downstream side.
    """
    la = universe.listings[a.symbol]
    lb = universe.listings[b.symbol]
    a_from, a_to = trade_conversion(a, la)
    b_from, b_to = trade_conversion(b, lb)
    shared = {a_from, a_to} & {b_from, b_to}
    if len(shared) != 1:
        raise InvalidPairingError(
            f"trades {a.id} and {b.id} share {len(shared)} coins, need exactly 1"
        )
    common = shared.pop()
    if a_to != common or b_from != common:
        raise InvalidPairingError(
            f"trades {a.id}->{b.id} do not hand off through {common}"
        )
    upstream = common_coin_qty(a, la, common)
    downstream = common_coin_qty(b, lb, common)
    diff = upstream - downstream
    dx = _tolerance_dx(lb, b, common) * tolerance_increments
    hi = upstream * fee.rate(Role.TAKER) + dx
    return (-dx <= diff <= hi), diff


@dataclass(frozen=True)
class DetectedSequence:
    """A clustered conversion sequence (three legs or two)."""

    kind: str  # "TRIANGULAR" | "INDIRECT"
    legs: tuple[Trade, ...]
    coins: tuple[str, ...]  # c1, c2, c3
    latencies_ms: tuple[int, ...]
    profit_bps: Decimal | None = None

    @property
    def base_coin(self) -> str:
        return self.coins[0]

    @property
    def trade_ids(self) -> tuple[int, ...]:
        return tuple(t.id for t in self.legs)

    @property
    def quantities(self) -> tuple[Decimal, ...]:
        return tuple(t.amount for t in self.legs)

    @property
    def prices(self) -> tuple[Decimal, ...]:
        return tuple(t.price for t in self.legs)

    @property
    def start_ms(self) -> int:
        return self.legs[0].date

    def to_json(self) -> dict:
        return {
            "schema": "arblens.sequence/1",
            "kind": self.kind,
            "trade_ids": list(self.trade_ids),
            "symbols": [t.symbol for t in self.legs],
            "coins": list(self.coins),
            "quantities": [str(q) for q in self.quantities],
            "prices": [str(p) for p in self.prices],
            "dates": [t.date for t in self.legs],
            "latencies_ms": list(self.latencies_ms),
            "profit_bps": None if self.profit_bps is None else str(self.profit_bps),
        }


@dataclass(frozen=True, slots=True)
class _Open:
    """A trade viewed as a chain head/extension: its conversion endpoints."""

    trade: Trade
    frm: str
    to: str


@dataclass(frozen=True, slots=True)
class _Chain2:
    leg1: _Open
    leg2: _Open


class _WindowIndex:
    """Open chain states keyed by the coin the next leg must start from,
    pruned as time advances."""

    def __init__(self, window_ms: int):
        self.window_ms = window_ms
        self.by_coin: dict[str, deque] = {}

    def add(self, coin: str, date: int, item) -> None:
        self.by_coin.setdefault(coin, deque()).append((date, item))

    def live(self, coin: str, now: int):
        queue = self.by_coin.get(coin)
        if not queue:
            return []
        floor = now - self.window_ms
        while queue and queue[0][0] < floor:
            queue.popleft()
        return queue


def _resolve(trade: Trade, universe: Universe) -> _Open:
    listing = universe.listings[trade.symbol]
    frm, to = trade_conversion(trade, listing)
    return _Open(trade, frm, to)


def detect_triangular(
    stream: TradeStream | Sequence[Trade],
    universe: Universe,
    fee: FeeModel | FeeSchedule,
    cfg: DetectorConfig = DetectorConfig(),
) -> list[DetectedSequence]:
    """Non-overlapping three-leg cycles closing on an anchor base coin."""
    candidates = _triangular_candidates(stream, universe, fee, cfg)
    return _reconcile(candidates, n_legs=3)


def detect_indirect(
    stream: TradeStream | Sequence[Trade],
    universe: Universe,
    fee: FeeModel | FeeSchedule,
    cfg: DetectorConfig = DetectorConfig(),
    consumed: set[int] | None = None,
) -> list[DetectedSequence]:
    """Non-overlapping two-leg conversions, skipping consumed trades."""
    candidates = _indirect_candidates(stream, universe, fee, cfg, consumed or set())
    return _reconcile(candidates, n_legs=2, consumed=consumed)


def _fee_resolver(fee: FeeModel | FeeSchedule):
    if isinstance(fee, FeeSchedule):
        return lambda t: fee_at(t, fee)
    return lambda t: fee


def _triangular_candidates(stream, universe, fee, cfg):
    fee_of = _fee_resolver(fee)
    singles = _WindowIndex(cfg.delta_t_ms)
    chains = _WindowIndex(cfg.delta_t_ms)
    out = []
    for trade in stream:
        node = _resolve(trade, universe)
        now = trade.date
        # close an open two-chain: need frm == c3, to == c1
        for date, chain in chains.live((node.frm, node.to), now):
            if now - date > cfg.delta_t_ms:
                continue
            matched, _ = quantities_match(
                chain.leg2.trade, trade, universe, fee_of(chain.leg2.trade.date)
            )
            if matched:
                out.append((trade.id, chain, node))
        # extend a single into a two-chain
        for date, head in singles.live(node.frm, now):
            if now - date > cfg.delta_t_ms:
                continue
            if node.to in (head.frm, head.to):
                continue
            matched, _ = quantities_match(
                head.trade, trade, universe, fee_of(head.trade.date)
            )
            if matched:
                # keyed by (closing from-coin, closing to-coin)
                chains.add((node.to, head.frm), now, _Chain2(head, node))
        if not cfg.require_anchor_base or universe.coin(node.frm).is_anchor:
            singles.add(node.to, now, node)
    return out


def _indirect_candidates(stream, universe, fee, cfg, consumed):
    fee_of = _fee_resolver(fee)
    singles = _WindowIndex(cfg.delta_t_ms)
    out = []
    for trade in stream:
        if trade.id in consumed:
            continue
        node = _resolve(trade, universe)
        now = trade.date
        for date, head in singles.live(node.frm, now):
            if now - date > cfg.delta_t_ms:
                continue
            if node.to in (head.frm, head.to):
                continue
            matched, _ = quantities_match(
                head.trade, trade, universe, fee_of(head.trade.date)
            )
            if matched:
                out.append((trade.id, head, node))
        if not cfg.require_anchor_base or universe.coin(node.frm).is_anchor:
            singles.add(node.to, now, node)
    return out


def _reconcile(candidates, n_legs: int, consumed: set[int] | None = None):
    """Accept candidates in closing-trade order; among chains closed by the
    same trade prefer the nearest-in-time legs (latest dates, then smallest
    ids). Every trade joins at most one sequence."""
    taken: set[int] = set()

    def sort_key(cand):
        if n_legs == 3:
            closing_id, chain, node = cand
            return (
                closing_id,
                -chain.leg2.trade.date,
                -chain.leg1.trade.date,
                chain.leg2.trade.id,
                chain.leg1.trade.id,
            )
        closing_id, head, node = cand
        return (closing_id, -head.trade.date, head.trade.id)

    out = []
    for cand in sorted(candidates, key=sort_key):
        if n_legs == 3:
            closing_id, chain, node = cand
            legs = (chain.leg1, chain.leg2, node)
        else:
            closing_id, head, node = cand
            legs = (head, node)
        ids = [leg.trade.id for leg in legs]
        if any(i in taken for i in ids):
            continue
        taken.update(ids)
        latencies = tuple(
            legs[i + 1].trade.date - legs[i].trade.date for i in range(len(legs) - 1)
        )
        coin_path = [legs[0].frm] + [leg.to for leg in legs]
        if n_legs == 3:
            coin_path = coin_path[:-1]  # drop the closing repeat of c1
        out.append(
            DetectedSequence(
                kind="TRIANGULAR" if n_legs == 3 else "INDIRECT",
                legs=tuple(leg.trade for leg in legs),
                coins=tuple(coin_path),
                latencies_ms=latencies,
            )
        )
    if consumed is not None:
        consumed.update(taken)
    out.sort(key=lambda s: s.trade_ids[0])
    return out


# -- profitability -----------------------------------------------------------


def net_improvement_bps(
    gross_ratio: Decimal, direct_ratio: Decimal, taker_rate: Decimal
) -> Decimal:
    """Improvement of a two-leg conversion over the direct pair, in bps.

    The indirect route pays two taker fees against the direct route's one,
    so the net comparison multiplies the gross ratio by one net-of-fee
    factor. Quantized to scale 8.
    """
    net = gross_ratio * (ONE - taker_rate)
    return q8(TEN_K * (div(net, direct_ratio) - ONE))


def direct_ratio_from_price(universe: Universe, c1: str, c3: str, price: Decimal) -> Decimal:
    """c3-per-c1 ratio implied by a direct-pair reference price."""
    direction = universe.direction(c1, c3)
    if direction.orientation is Orientation.FROM_IS_QUOTE:
        return div(ONE, price)
    return price


def conversion_profitability(
    seq: DetectedSequence,
    ref: ReferencePrice,
    universe: Universe,
    fee: FeeModel,
) -> Decimal | None:
    """bps improvement of an INDIRECT sequence over its direct pair, or
    None when the reference is unavailable."""
    if seq.kind != "INDIRECT":
        raise InvalidPairingError("profitability is defined for INDIRECT sequences")
    if ref.source is PriceSource.UNAVAILABLE or ref.price is None:
        return None
    c1, c2, c3 = seq.coins
    leg1, leg2 = seq.legs
    spend = common_coin_qty(leg1, universe.listings[leg1.symbol], c1)
    out = common_coin_qty(leg2, universe.listings[leg2.symbol], c3)
    if spend == 0:
        return None
    gross_ratio = div(out, spend)
    direct = direct_ratio_from_price(universe, c1, c3, ref.price)
    return net_improvement_bps(gross_ratio, direct, fee.rate(Role.TAKER))


def attach_profitability(
    sequences: Iterable[DetectedSequence],
    stream: TradeStream,
    universe: Universe,
    fee: FeeModel | FeeSchedule,
    cfg: DetectorConfig = DetectorConfig(),
    books: SnapshotStream | None = None,
) -> list[DetectedSequence]:
    """Score INDIRECT sequences against their direct-pair reference price.

    The reference is taken just before the first leg: a book snapshot
    within tolerance when one exists, otherwise the VWAP of direct-pair
    trades over the preceding window. Sequences whose direct pair is not
    listed, or whose reference is unavailable, keep profit_bps=None.
    """
    fee_of = _fee_resolver(fee)
    out = []
    for seq in sequences:
        if seq.kind != "INDIRECT":
            out.append(seq)
            continue
        c1, _, c3 = seq.coins
        try:
            direction = universe.direction(c1, c3)
        except UnlistedPairError:
            out.append(seq)
            continue
        side = "ask" if direction.orientation is Orientation.FROM_IS_QUOTE else "bid"
        ref = reference_price(
            direction.listing.symbol,
            seq.start_ms,
            cfg.vwap_window_ms,
            stream,
            books,
            cfg.book_tolerance_ms,
            side=side,
        )
        bps = conversion_profitability(seq, ref, universe, fee_of(seq.start_ms))
        out.append(replace(seq, profit_bps=bps))
    return out
