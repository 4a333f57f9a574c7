"""Competing-conversion clusters and loss-mitigating exit analysis.

Detected two-leg conversions that try to complete the same second leg
within the competition window form a cluster. Members with a favorable
reference comparison are winners; unfavorable ones are losers. A loser is
loss-mitigating when the shared leg's capacity was plausibly consumed by a
winner, which the trade log can only witness indirectly: the next trade on
the shared pair printing at a different price.

Losers unload their intermediary-coin position either in one trade of the
full acquired quantity (full exit) or across several trades that sum to it
(partial exit). Traders who split never produce a quantity-matched second
leg, so the cluster stage additionally admits "attempt" members: unmatched
taker trades that acquired the intermediary coin inside the competition
window and whose exits classify cleanly. Exit trades may target any coin;
exits into coins other than the cluster target are valued through a
reference price of that coin against the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

from .detect import (
    DetectedSequence,
    DetectorConfig,
    common_coin_qty,
    direct_ratio_from_price,
    trade_conversion,
)
from .errors import InvalidPriceError, UnlistedPairError
from .ingest import PriceSource, SnapshotStream, Trade, TradeStream, reference_price
from .market import FeeModel, Orientation, Role, Universe
from .numeric import D, ONE, ZERO, div, q8

__all__ = [
    "PartialExitProblem",
    "partial_exit_loss",
    "ExitClassification",
    "LoserReport",
    "CompetitionCluster",
    "cluster_competing",
    "capacity_exhausted",
    "classify_exit",
    "analyze_competition",
]

TEN_K = D("1E4")


@dataclass(frozen=True)
class PartialExitProblem:
    """Inputs of the exit loss function.

    q1: intermediary-coin quantity acquired on the first leg.
    p12: achieved first-leg ratio (intermediary per source coin).
    p13: direct source-to-target ratio the trader intended to beat.
    exits: (q_j, p_j) pairs, q_j in intermediary terms and p_j the achieved
    exit ratio in target-equivalent terms per intermediary unit.
    """

    q1: Decimal
    p12: Decimal
    p13: Decimal
    exits: tuple[tuple[Decimal, Decimal], ...]


def partial_exit_loss(problem: PartialExitProblem) -> Decimal:
    """Loss of an exit basket: sum of q_j * p13 / (p12 * p_j).

    Each per-unit ratio is carried at scale 8 (ratios are published
    scale-8 quantities), then scaled by the exact q_j; a basket entirely at
    the fair ratio p13/p12 therefore loses exactly q1.
    """
    if problem.p12 <= 0 or problem.p13 <= 0:
        raise InvalidPriceError("p12 and p13 must be > 0")
    total = ZERO
    for q_j, p_j in problem.exits:
        if p_j <= 0:
            raise InvalidPriceError(f"exit ratio must be > 0, got {p_j}")
        total += q_j * q8(div(problem.p13, problem.p12 * p_j))
    return total


@dataclass(frozen=True)
class ExitClassification:
    kind: str  # FULL_EXIT | PARTIAL_EXIT | NONE
    exit_trades: tuple[Trade, ...] = ()
    exit_coin_count: int = 0
    realized_loss_bps: Decimal | None = None
    q1: Decimal = ZERO
    truncated_search: bool = False

    @property
    def exit_trade_ids(self) -> tuple[int, ...]:
        return tuple(t.id for t in self.exit_trades)


@dataclass(frozen=True)
class LoserReport:
    """One losing (or attempted) conversion inside a cluster."""

    leg1: Trade
    q1: Decimal
    sequence: DetectedSequence | None  # None for attempt members
    loss_mitigating: bool = False
    exit: ExitClassification | None = None


@dataclass
class CompetitionCluster:
    intermediary: str  # c2
    target: str  # c3
    symbol: str  # listed pair of the shared second leg
    anchor_ms: int
    members: list[DetectedSequence] = field(default_factory=list)
    winners: list[DetectedSequence] = field(default_factory=list)
    losers: list[LoserReport] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members) + sum(1 for l in self.losers if l.sequence is None)

    def to_json(self) -> dict:
        return {
            "schema": "arblens.cluster/1",
            "intermediary": self.intermediary,
            "target": self.target,
            "symbol": self.symbol,
            "anchor_ms": self.anchor_ms,
            "member_trade_ids": [list(m.trade_ids) for m in self.members],
            "winner_trade_ids": [list(w.trade_ids) for w in self.winners],
            "losers": [
                {
                    "leg1_id": l.leg1.id,
                    "q1": str(l.q1),
                    "detected": l.sequence is not None,
                    "loss_mitigating": l.loss_mitigating,
                    "exit_kind": l.exit.kind if l.exit else "NONE",
                    "exit_trade_ids": list(l.exit.exit_trade_ids) if l.exit else [],
                    "exit_coin_count": l.exit.exit_coin_count if l.exit else 0,
                    "realized_loss_bps": (
                        str(l.exit.realized_loss_bps)
                        if l.exit and l.exit.realized_loss_bps is not None
                        else None
                    ),
                    "truncated_search": bool(l.exit and l.exit.truncated_search),
                }
                for l in self.losers
            ],
        }


def cluster_competing(
    conversions: Sequence[DetectedSequence],
    cfg: DetectorConfig = DetectorConfig(),
) -> list[CompetitionCluster]:
    """Partition INDIRECT conversions by shared second-leg direction into
    clusters whose first legs start within the competition window of the
    earliest member."""
    groups: dict[tuple[str, str], list[DetectedSequence]] = {}
    for seq in conversions:
        if seq.kind != "INDIRECT":
            continue
        groups.setdefault((seq.coins[1], seq.coins[2]), []).append(seq)

    clusters: list[CompetitionCluster] = []
    for (c2, c3), seqs in sorted(groups.items()):
        seqs.sort(key=lambda s: (s.start_ms, s.trade_ids[0]))
        current: CompetitionCluster | None = None
        for seq in seqs:
            if current is None or seq.start_ms - current.anchor_ms > cfg.competition_window_ms:
                current = CompetitionCluster(
                    intermediary=c2,
                    target=c3,
                    symbol=seq.legs[1].symbol,
                    anchor_ms=seq.start_ms,
                )
                clusters.append(current)
            current.members.append(seq)
            bps = seq.profit_bps
            if bps is not None and bps > 0:
                current.winners.append(seq)
    clusters.sort(key=lambda c: (c.anchor_ms, c.symbol))
    return clusters


def capacity_exhausted(
    loser_anchor: Trade,
    stream: TradeStream,
    winner_leg2: Trade | None = None,
) -> bool:
    """Heuristic: was the shared level consumed before the loser traded?

    With a winner in hand: true iff the winner's fill precedes the loser's
    exit and the next trade on that pair printed at a different price.
    Without one: true iff the trade immediately preceding the loser's own
    fill on the pair printed at a different price. No subsequent trade
    means false, conservatively.
    """
    if winner_leg2 is not None:
        if winner_leg2.id >= loser_anchor.id:
            return False
        nxt = stream.next_on_symbol_after(winner_leg2.symbol, winner_leg2.id)
        return nxt is not None and nxt.price != winner_leg2.price
    prev = stream.prev_on_symbol_before(loser_anchor.symbol, loser_anchor.id)
    return prev is not None and prev.price != loser_anchor.price


def _exit_candidates(
    universe: Universe,
    stream: TradeStream,
    c2: str,
    leg1: Trade,
    q1: Decimal,
    cfg: DetectorConfig,
    exclude: set[int],
    fee: FeeModel,
) -> tuple[list[Trade], Decimal]:
    """Taker trades selling c2 within the exit window, with the matching
    tolerance implied by the loosest candidate increment."""
    out: list[Trade] = []
    max_dx = ZERO
    taker = fee.rate(Role.TAKER)
    for symbol in _symbols_with(universe, c2):
        listing = universe.listings[symbol]
        for tr in stream.in_window(symbol, leg1.date, leg1.date + cfg.exit_window_ms + 1):
            if tr.id <= leg1.id or tr.id in exclude:
                continue
            frm, _ = trade_conversion(tr, listing)
            if frm != c2:
                continue
            spent = common_coin_qty(tr, listing, c2)
            dx = listing.qty_increment
            if listing.base.symbol != c2:
                dx = dx * tr.price
            if spent > q1 + q1 * taker + dx:
                continue
            out.append(tr)
            if dx > max_dx:
                max_dx = dx
    out.sort(key=lambda t: t.id)
    return out, max_dx


def _symbols_with(universe: Universe, coin: str) -> list[str]:
    return [
        sym
        for sym, listing in universe.listings.items()
        if coin in (listing.base.symbol, listing.quote.symbol)
    ]


def _subset_search(
    candidates: list[tuple[Decimal, int]], target: Decimal, lo: Decimal, hi: Decimal
) -> list[int] | None:
    """First subset (in value-descending DFS order) whose sum lands in
    [target - hi, target + lo]; indexes into the candidate list."""
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i][0], i))
    values = [candidates[i][0] for i in order]
    suffix = [ZERO] * (len(values) + 1)
    for i in range(len(values) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + values[i]

    chosen: list[int] = []

    def dfs(i: int, acc: Decimal) -> bool:
        diff = target - acc
        if -lo <= diff <= hi:
            return bool(chosen)
        if i == len(values):
            return False
        if acc > target + lo:  # overshot beyond slack
            return False
        if acc + suffix[i] < target - hi:  # cannot reach target anymore
            return False
        chosen.append(order[i])
        if dfs(i + 1, acc + values[i]):
            return True
        chosen.pop()
        return dfs(i + 1, acc)

    if dfs(0, ZERO):
        return chosen
    return None


def classify_exit(
    leg1: Trade,
    q1: Decimal,
    stream: TradeStream,
    universe: Universe,
    fee: FeeModel,
    cfg: DetectorConfig = DetectorConfig(),
    exclude: set[int] | None = None,
) -> ExitClassification:
    """How the acquired intermediary quantity left the wallet.

    FULL_EXIT: one taker trade sells the full quantity (within the fee +
    one-increment tolerance). PARTIAL_EXIT: a subset of candidate sells
    sums to it, found by bounded depth-first search over at most
    ``max_subset_candidates`` time-ordered candidates (a larger pool is
    truncated and flagged). Otherwise NONE.
    """
    listing1 = universe.listings[leg1.symbol]
    _, c2 = trade_conversion(leg1, listing1)
    candidates, max_dx = _exit_candidates(
        universe, stream, c2, leg1, q1, cfg, exclude or set(), fee
    )
    taker = fee.rate(Role.TAKER)
    hi = q1 * taker + max_dx
    lo = max_dx

    spent = [
        (common_coin_qty(tr, universe.listings[tr.symbol], c2), tr) for tr in candidates
    ]
    for qty, tr in spent:
        diff = q1 - qty
        if -lo <= diff <= hi:
            return ExitClassification(
                kind="FULL_EXIT",
                exit_trades=(tr,),
                exit_coin_count=1,
                q1=q1,
            )

    truncated = len(spent) > cfg.max_subset_candidates
    pool = spent[: cfg.max_subset_candidates]
    partial_pool = [(qty, tr) for qty, tr in pool if qty < q1]
    picked = _subset_search(
        [(qty, i) for i, (qty, _) in enumerate(partial_pool)], q1, lo, hi
    )
    if picked is not None:
        trades = tuple(sorted((partial_pool[i][1] for i in picked), key=lambda t: t.id))
        coins = {
            trade_conversion(t, universe.listings[t.symbol])[1] for t in trades
        }
        return ExitClassification(
            kind="PARTIAL_EXIT",
            exit_trades=trades,
            exit_coin_count=len(coins),
            q1=q1,
            truncated_search=truncated,
        )
    return ExitClassification(kind="NONE", q1=q1, truncated_search=truncated)


def _exit_ratio_in_target_terms(
    exit_trade: Trade,
    c2: str,
    target: str,
    stream: TradeStream,
    universe: Universe,
    cfg: DetectorConfig,
    books: SnapshotStream | None,
) -> Decimal | None:
    """Achieved c2 -> exit-coin ratio expressed per unit of the cluster
    target coin; needs a reference for cross-coin exits."""
    listing = universe.listings[exit_trade.symbol]
    _, to_coin = trade_conversion(exit_trade, listing)
    got = common_coin_qty(exit_trade, listing, to_coin)
    gave = common_coin_qty(exit_trade, listing, c2)
    if gave == 0:
        return None
    rate = div(got, gave)
    if to_coin == target:
        return rate
    try:
        direction = universe.direction(to_coin, target)
    except UnlistedPairError:
        return None
    side = "ask" if direction.orientation is Orientation.FROM_IS_QUOTE else "bid"
    ref = reference_price(
        direction.listing.symbol,
        exit_trade.date,
        cfg.vwap_window_ms,
        stream,
        books,
        cfg.book_tolerance_ms,
        side=side,
    )
    if ref.source is PriceSource.UNAVAILABLE or ref.price is None:
        return None
    return rate * direct_ratio_from_price(universe, to_coin, target, ref.price)


def _realized_loss_bps(
    leg1: Trade,
    q1: Decimal,
    exit_trades: Sequence[Trade],
    c1: str,
    c2: str,
    target: str,
    stream: TradeStream,
    universe: Universe,
    cfg: DetectorConfig,
    books: SnapshotStream | None,
) -> Decimal | None:
    listing1 = universe.listings[leg1.symbol]
    spend1 = common_coin_qty(leg1, listing1, c1)
    if spend1 == 0:
        return None
    p12 = div(q1, spend1)
    try:
        direction = universe.direction(c1, target)
    except UnlistedPairError:
        return None
    side = "ask" if direction.orientation is Orientation.FROM_IS_QUOTE else "bid"
    ref = reference_price(
        direction.listing.symbol,
        leg1.date,
        cfg.vwap_window_ms,
        stream,
        books,
        cfg.book_tolerance_ms,
        side=side,
    )
    if ref.source is PriceSource.UNAVAILABLE or ref.price is None:
        return None
    p13 = direct_ratio_from_price(universe, c1, target, ref.price)
    exits = []
    for tr in exit_trades:
        p_j = _exit_ratio_in_target_terms(tr, c2, target, stream, universe, cfg, books)
        if p_j is None:
            return None
        q_j = common_coin_qty(tr, universe.listings[tr.symbol], c2)
        exits.append((q_j, p_j))
    loss = partial_exit_loss(PartialExitProblem(q1, p12, p13, tuple(exits)))
    return q8(TEN_K * (div(loss, q1) - ONE))


def analyze_competition(
    sequences: Sequence[DetectedSequence],
    stream: TradeStream,
    universe: Universe,
    fee: FeeModel,
    cfg: DetectorConfig = DetectorConfig(),
    books: SnapshotStream | None = None,
    consumed: set[int] | None = None,
) -> list[CompetitionCluster]:
    """Full competition pipeline: cluster, admit attempts, classify exits.

    ``consumed`` holds trade ids already attributed to detected sequences;
    attempt admission and exit classification never reuse them, except that
    a loser's own legs stay available to its own exit search.
    """
    clusters = cluster_competing(sequences, cfg)
    consumed = set(consumed) if consumed else set()
    for seq in sequences:
        consumed.update(seq.trade_ids)

    for cluster in clusters:
        c2, c3 = cluster.intermediary, cluster.target
        # detected losers: unfavorable completed conversions
        for seq in cluster.members:
            if seq.profit_bps is None or seq.profit_bps >= 0:
                continue
            leg1 = seq.legs[0]
            q1 = common_coin_qty(leg1, universe.listings[leg1.symbol], c2)
            cluster.losers.append(
                LoserReport(leg1=leg1, q1=q1, sequence=seq)
            )
        # attempt losers: unmatched acquisitions of c2 near the anchor whose
        # exits classify
        if cluster.winners:
            for tr in _attempt_candidates(universe, stream, cluster, cfg, consumed):
                listing = universe.listings[tr.symbol]
                q1 = common_coin_qty(tr, listing, c2)
                exclude = consumed - {tr.id}
                exit_cls = classify_exit(tr, q1, stream, universe, fee, cfg, exclude)
                if exit_cls.kind == "NONE":
                    continue
                if not any(
                    e.symbol == cluster.symbol for e in exit_cls.exit_trades
                ):
                    continue
                consumed.add(tr.id)
                consumed.update(exit_cls.exit_trade_ids)
                cluster.losers.append(
                    LoserReport(leg1=tr, q1=q1, sequence=None, exit=exit_cls)
                )
        cluster.losers.sort(key=lambda l: l.leg1.id)

        # capacity gating + final exit classification per loser
        finished = []
        for loser in cluster.losers:
            anchor = (
                loser.sequence.legs[1]
                if loser.sequence is not None
                else (loser.exit.exit_trades[0] if loser.exit else loser.leg1)
            )
            winner_leg2 = _preceding_winner_leg2(cluster.winners, anchor)
            gated = capacity_exhausted(anchor, stream, winner_leg2)
            if not gated:
                finished.append(
                    LoserReport(loser.leg1, loser.q1, loser.sequence, False, None)
                )
                continue
            exit_cls = loser.exit
            if exit_cls is None:
                exclude = consumed - set(
                    loser.sequence.trade_ids if loser.sequence else [loser.leg1.id]
                )
                exit_cls = classify_exit(
                    loser.leg1, loser.q1, stream, universe, fee, cfg, exclude
                )
            if exit_cls.kind != "NONE" and exit_cls.realized_loss_bps is None:
                c1 = (
                    loser.sequence.coins[0]
                    if loser.sequence is not None
                    else trade_conversion(
                        loser.leg1, universe.listings[loser.leg1.symbol]
                    )[0]
                )
                loss = _realized_loss_bps(
                    loser.leg1, loser.q1, exit_cls.exit_trades,
                    c1, c2, c3, stream, universe, cfg, books,
                )
                exit_cls = ExitClassification(
                    kind=exit_cls.kind,
                    exit_trades=exit_cls.exit_trades,
                    exit_coin_count=exit_cls.exit_coin_count,
                    realized_loss_bps=loss,
                    q1=exit_cls.q1,
                    truncated_search=exit_cls.truncated_search,
                )
            finished.append(
                LoserReport(
                    loser.leg1, loser.q1, loser.sequence,
                    exit_cls.kind != "NONE", exit_cls,
                )
            )
        cluster.losers = finished
    return clusters


def _preceding_winner_leg2(
    winners: Sequence[DetectedSequence], anchor: Trade
) -> Trade | None:
    best = None
    for w in winners:
        leg2 = w.legs[1]
        if leg2.id < anchor.id and (best is None or leg2.id > best.id):
            best = leg2
    return best


def _attempt_candidates(
    universe: Universe,
    stream: TradeStream,
    cluster: CompetitionCluster,
    cfg: DetectorConfig,
    consumed: set[int],
) -> list[Trade]:
    c2 = cluster.intermediary
    lo = cluster.anchor_ms - cfg.competition_window_ms
    hi = cluster.anchor_ms + cfg.competition_window_ms
    out = []
    for symbol in _symbols_with(universe, c2):
        listing = universe.listings[symbol]
        for tr in stream.in_window(symbol, lo, hi + 1):
            if tr.id in consumed:
                continue
            _, to_coin = trade_conversion(tr, listing)
            if to_coin == c2:
                out.append(tr)
    out.sort(key=lambda t: t.id)
    return out
