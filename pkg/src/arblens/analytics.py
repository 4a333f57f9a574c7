"""Aggregation of detections into summary, latency, and return statistics.

All statistics are exact-decimal and permutation-invariant; day bucketing
is UTC. Quantity-weighted returns weight each conversion by the base-coin
quantity it committed, so the weighted mean exceeds the equal-weighted one
exactly when larger quantities rode more profitable conversions.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from typing import Sequence

from .competition import CompetitionCluster
from .detect import DetectedSequence, common_coin_qty
from .errors import ConsistencyError, UnlistedPairError
from .ingest import TradeStream
from .market import Universe
from .numeric import D, ZERO, div, q8

__all__ = [
    "SummaryReport",
    "LatencyStats",
    "ReturnStats",
    "summarize",
    "latency_stats",
    "returns",
]


def _day(date_ms: int) -> str:
    return datetime.fromtimestamp(date_ms / 1000, tz=timezone.utc).strftime("%Y-%m-%d")


@dataclass
class SummaryReport:
    total_trades: int
    triangular_count: int
    indirect_count: int
    triangular_trade_share: Decimal
    indirect_trade_share: Decimal
    daily_counts: dict[str, dict[str, int]]
    daily_indirect_share_of_direct: dict[str, Decimal | None]
    cycle_census: dict[str, int] | None = None

    def to_json(self) -> dict:
        return {
            "schema": "arblens.summary/1",
            "total_trades": self.total_trades,
            "triangular_count": self.triangular_count,
            "indirect_count": self.indirect_count,
            "triangular_trade_share": str(self.triangular_trade_share),
            "indirect_trade_share": str(self.indirect_trade_share),
            "daily_counts": self.daily_counts,
            "daily_indirect_share_of_direct": {
                d: None if v is None else str(v)
                for d, v in self.daily_indirect_share_of_direct.items()
            },
            "cycle_census": self.cycle_census,
        }


def summarize(
    detections: Sequence[DetectedSequence],
    stream: TradeStream,
    universe: Universe | None = None,
    cycle_census: dict[str, int] | None = None,
) -> SummaryReport:
    """Counts, trade shares, and daily series for a detection run.

    Every detection must reference trades present in the stream; anything
    else means the two artifacts come from different runs.
    """
    total = len(stream)
    tri = [s for s in detections if s.kind == "TRIANGULAR"]
    ind = [s for s in detections if s.kind == "INDIRECT"]
    member_ids: set[int] = set()
    for seq in detections:
        for tid in seq.trade_ids:
            if stream.by_id(tid) is None:
                raise ConsistencyError(
                    f"detection references trade {tid} not present in the stream"
                )
            member_ids.add(tid)

    daily_counts: dict[str, dict[str, int]] = defaultdict(
        lambda: {"TRIANGULAR": 0, "INDIRECT": 0}
    )
    for seq in detections:
        if seq.kind in ("TRIANGULAR", "INDIRECT"):
            daily_counts[_day(seq.start_ms)][seq.kind] += 1

    tri_share = div(D(sum(len(s.legs) for s in tri)), D(total)) if total else ZERO
    ind_share = div(D(sum(len(s.legs) for s in ind)), D(total)) if total else ZERO

    daily_share = _daily_indirect_share(ind, stream, universe)

    return SummaryReport(
        total_trades=total,
        triangular_count=len(tri),
        indirect_count=len(ind),
        triangular_trade_share=q8(tri_share),
        indirect_trade_share=q8(ind_share),
        daily_counts=dict(sorted(daily_counts.items())),
        daily_indirect_share_of_direct=daily_share,
        cycle_census=cycle_census,
    )


def _daily_indirect_share(
    indirect: Sequence[DetectedSequence],
    stream: TradeStream,
    universe: Universe | None,
) -> dict[str, Decimal | None]:
    """Per day: mean over direct pairs of (volume converted indirectly) /
    (volume traded directly), both in source-coin terms."""
    if universe is None:
        return {}
    # indirect volume per (day, direct pair, source coin), in source terms
    per_key: dict[tuple[str, str, str], Decimal] = defaultdict(lambda: ZERO)
    for seq in indirect:
        c1, _, c3 = seq.coins
        try:
            direction = universe.direction(c1, c3)
        except UnlistedPairError:
            continue
        leg1 = seq.legs[0]
        spend = common_coin_qty(leg1, universe.listings[leg1.symbol], c1)
        per_key[(_day(seq.start_ms), direction.listing.symbol, c1)] += spend

    by_day: dict[str, list[Decimal]] = defaultdict(list)
    for (day, symbol, c1), indirect_vol in per_key.items():
        listing = universe.listings[symbol]
        direct_vol = ZERO
        for tr in stream.by_symbol.get(symbol, []):
            if _day(tr.date) == day:
                direct_vol += common_coin_qty(tr, listing, c1)
        if direct_vol > 0:
            by_day[day].append(div(indirect_vol, direct_vol))
    return {
        day: q8(div(sum(ratios, ZERO), D(len(ratios))))
        for day, ratios in sorted(by_day.items())
    }


@dataclass
class LatencyStats:
    kind: str
    count: int
    sample_count: int
    mean_ms: Decimal | None
    stdev_ms: Decimal | None
    pct_below_30ms: Decimal | None
    histogram: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema": "arblens.latency/1",
            "kind": self.kind,
            "count": self.count,
            "sample_count": self.sample_count,
            "mean_ms": None if self.mean_ms is None else str(self.mean_ms),
            "stdev_ms": None if self.stdev_ms is None else str(self.stdev_ms),
            "pct_below_30ms": (
                None if self.pct_below_30ms is None else str(self.pct_below_30ms)
            ),
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def latency_stats(
    detections: Sequence[DetectedSequence], kind: str = "INDIRECT"
) -> LatencyStats:
    """Mean/stdev/percent-below-30ms over inter-leg latencies of one kind.

    Triangular sequences contribute both inter-leg gaps, so the histogram
    mass equals the latency sample count (one per sequence for indirect).
    Stdev is the population form, computed in a single Welford pass.
    """
    seqs = [s for s in detections if s.kind == kind]
    samples: list[int] = []
    for s in seqs:
        samples.extend(s.latencies_ms)
    hist = Counter(samples)
    n = len(samples)
    if n == 0:
        return LatencyStats(kind, 0, 0, None, None, None, {})
    mean = ZERO
    m2 = ZERO
    for i, x in enumerate(samples, start=1):
        xd = D(x)
        delta = xd - mean
        mean += div(delta, D(i))
        m2 += delta * (xd - mean)
    stdev = div(m2, D(n)).sqrt()
    below = sum(1 for x in samples if x <= 30)
    return LatencyStats(
        kind=kind,
        count=len(seqs),
        sample_count=n,
        mean_ms=q8(mean),
        stdev_ms=q8(stdev),
        pct_below_30ms=q8(div(D(below), D(n))),
        histogram=dict(sorted(hist.items())),
    )


@dataclass
class ReturnStats:
    count: int
    equal_weighted_bps: Decimal | None
    return_on_capital_bps: Decimal | None
    pct_profitable: Decimal | None
    excluded_unavailable: int
    loss_mitigation: dict | None = None

    def to_json(self) -> dict:
        lm = self.loss_mitigation
        return {
            "schema": "arblens.returns/1",
            "count": self.count,
            "equal_weighted_bps": (
                None if self.equal_weighted_bps is None else str(self.equal_weighted_bps)
            ),
            "return_on_capital_bps": (
                None
                if self.return_on_capital_bps is None
                else str(self.return_on_capital_bps)
            ),
            "pct_profitable": (
                None if self.pct_profitable is None else str(self.pct_profitable)
            ),
            "excluded_unavailable": self.excluded_unavailable,
            "loss_mitigation": lm,
        }


def returns(
    detections: Sequence[DetectedSequence],
    universe: Universe | None = None,
    clusters: Sequence[CompetitionCluster] | None = None,
) -> ReturnStats:
    """Equal-weighted and quantity-weighted mean returns over conversions
    that have a profitability figure; UNAVAILABLE ones are excluded.

    With clusters supplied, adds the loss-mitigation breakdown: the share
    of losing conversions that were mitigating, the full/partial split and
    their mean realized losses, mean exit coin count, and the mean number
    of competing conversions faced by mitigating losers.
    """
    scored = [
        s for s in detections if s.kind == "INDIRECT" and s.profit_bps is not None
    ]
    excluded = sum(
        1 for s in detections if s.kind == "INDIRECT" and s.profit_bps is None
    )
    if not scored:
        return ReturnStats(0, None, None, None, excluded, _loss_breakdown(clusters))

    total_bps = sum((s.profit_bps for s in scored), ZERO)
    ew = q8(div(total_bps, D(len(scored))))

    weighted = ZERO
    total_qty = ZERO
    if universe is not None:
        for s in scored:
            leg1 = s.legs[0]
            qty = common_coin_qty(leg1, universe.listings[leg1.symbol], s.coins[0])
            weighted += qty * s.profit_bps
            total_qty += qty
    roc = q8(div(weighted, total_qty)) if total_qty > 0 else None

    profitable = sum(1 for s in scored if s.profit_bps > 0)
    pct = q8(div(D(profitable), D(len(scored))))
    return ReturnStats(
        count=len(scored),
        equal_weighted_bps=ew,
        return_on_capital_bps=roc,
        pct_profitable=pct,
        excluded_unavailable=excluded,
        loss_mitigation=_loss_breakdown(clusters),
    )


def _loss_breakdown(clusters: Sequence[CompetitionCluster] | None) -> dict | None:
    if clusters is None:
        return None
    losers = [l for c in clusters for l in c.losers]
    mitigating = [l for l in losers if l.loss_mitigating and l.exit is not None]
    full = [l for l in mitigating if l.exit.kind == "FULL_EXIT"]
    partial = [l for l in mitigating if l.exit.kind == "PARTIAL_EXIT"]

    def mean_loss(group):
        vals = [
            l.exit.realized_loss_bps
            for l in group
            if l.exit.realized_loss_bps is not None
        ]
        if not vals:
            return None
        return str(q8(div(sum(vals, ZERO), D(len(vals)))))

    def share(part, whole):
        if not whole:
            return None
        return str(q8(div(D(len(part)), D(len(whole)))))

    competing = []
    for cluster in clusters:
        others = cluster.size - 1
        for l in cluster.losers:
            if l.loss_mitigating:
                competing.append(others)
    mean_competing = (
        str(q8(div(D(sum(competing)), D(len(competing))))) if competing else None
    )
    coin_counts = [l.exit.exit_coin_count for l in mitigating]
    mean_coins = (
        str(q8(div(D(sum(coin_counts)), D(len(coin_counts))))) if coin_counts else None
    )
    return {
        "losing_conversions": len(losers),
        "loss_mitigating": len(mitigating),
        "pct_loss_mitigating": share(mitigating, losers),
        "full_exits": len(full),
        "partial_exits": len(partial),
        "pct_full": share(full, mitigating),
        "pct_partial": share(partial, mitigating),
        "mean_full_exit_loss_bps": mean_loss(full),
        "mean_partial_exit_loss_bps": mean_loss(partial),
        "mean_exit_coin_count": mean_coins,
        "mean_competing_conversions": mean_competing,
    }
