"""Scenario planner and runner: plants labeled trading activity.

A scenario spec (JSON) describes the pair universe, fee assumptions, and a
roster of agents: background noise, triangular bots, indirect-conversion
bots, competing clusters with full/partial loss-mitigating exits, and
decoys. The planner turns the roster into a deterministic order schedule,
feeds it through the matching engine, and rebuilds ground-truth labels from
order tags after the run, so label trade ids always refer to real fills.

Planted liquidity is provided by a dedicated "lp" owner as LIMIT_MAKER
orders sized exactly to what the bots consume; reference prices are planted
as atomic maker+taker prints that leave nothing resting. The label log is a
sidecar; the public trade log carries no ground-truth columns.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable

from ..detect import net_improvement_bps
from ..errors import ConsistencyError, ScenarioConfigError
from ..market import FeeModel, Orientation, Role, Universe
from ..numeric import D, ONE, ZERO, div, q8, round_down
from .engine import MatchingEngine, Order, OrderType, Side, SimTrade, SnapshotRow

__all__ = [
    "LatencyModel",
    "ScenarioSpec",
    "GroundTruthLabel",
    "ScenarioOutput",
    "run_scenario",
    "write_trades_csv",
    "write_snapshots",
    "write_labels",
    "load_labels",
]

TRADE_COLUMNS = ["id", "exchange", "symbol", "date", "price", "amount", "sell"]
SNAPSHOT_COLUMNS = ["symbol", "date", "type", "amount", "price"]


@dataclass(frozen=True)
class LatencyModel:
    """Truncated-normal inter-leg latency in integer milliseconds."""

    mean_ms: float = 21.0
    stdev_ms: float = 14.0
    lo_ms: int = 1
    hi_ms: int = 100

    def sample(self, rng: random.Random) -> int:
        while True:
            x = round(rng.normalvariate(self.mean_ms, self.stdev_ms))
            if self.lo_ms <= x <= self.hi_ms:
                return int(x)

    @classmethod
    def from_dict(cls, obj: dict | None) -> "LatencyModel":
        if not obj:
            return cls()
        return cls(
            mean_ms=float(obj.get("mean_ms", 21.0)),
            stdev_ms=float(obj.get("stdev_ms", 14.0)),
            lo_ms=int(obj.get("lo_ms", 1)),
            hi_ms=int(obj.get("hi_ms", 100)),
        )


@dataclass
class ScenarioSpec:
    seed: int
    duration_ms: int
    listings: list[dict]
    agents: list[dict] = field(default_factory=list)
    mids: dict[str, str] = field(default_factory=dict)
    fees: dict = field(default_factory=dict)
    snapshot_cadence_ms: int = 60_000

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ScenarioConfigError("duration_ms must be > 0")
        if self.snapshot_cadence_ms <= 0:
            raise ScenarioConfigError("snapshot_cadence_ms must be > 0")

    def fee_model(self) -> FeeModel:
        f = self.fees
        return FeeModel(
            maker_bps=D(str(f.get("maker_bps", "1.2"))),
            taker_bps=D(str(f.get("taker_bps", "2.4"))),
            bnb_flat=D(str(f.get("bnb_flat", "5E-4"))),
            pay_in_bnb=bool(f.get("pay_in_bnb", True)),
        )

    @classmethod
    def from_json(cls, source) -> "ScenarioSpec":
        if hasattr(source, "read"):
            raw = json.load(source)
        else:
            with open(source, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        return cls(
            seed=int(raw["seed"]),
            duration_ms=int(raw["duration_ms"]),
            listings=list(raw["listings"]),
            agents=list(raw.get("agents", [])),
            mids={k: str(v) for k, v in raw.get("mids", {}).items()},
            fees=dict(raw.get("fees", {})),
            snapshot_cadence_ms=int(raw.get("snapshot_cadence_ms", 60_000)),
        )

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "listings": self.listings,
            "agents": self.agents,
            "mids": self.mids,
            "fees": self.fees,
            "snapshot_cadence_ms": self.snapshot_cadence_ms,
        }


@dataclass
class GroundTruthLabel:
    """One planted structure: its fills, its economics, what a perfect
    detector should report."""

    kind: str  # TRIANGULAR | INDIRECT | COMPETING_WINNER | COMPETING_LOSER | NOISE
    trade_ids: list[int]
    planted_bps: Decimal | None = None
    expect: str | None = None  # TRIANGULAR | INDIRECT | None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "trade_ids": self.trade_ids,
            "planted_bps": None if self.planted_bps is None else str(self.planted_bps),
            "expect": self.expect,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruthLabel":
        return cls(
            kind=obj["kind"],
            trade_ids=list(obj["trade_ids"]),
            planted_bps=None if obj.get("planted_bps") is None else D(obj["planted_bps"]),
            expect=obj.get("expect"),
            meta=dict(obj.get("meta", {})),
        )


@dataclass
class ScenarioOutput:
    trades: list[SimTrade]
    labels: list[GroundTruthLabel]
    snapshots: list[SnapshotRow]
    universe: Universe
    spec: ScenarioSpec


@dataclass
class _PendingLabel:
    kind: str
    leg_tags: list[str]  # tags whose taker fills are the member trades
    maker_tags: list[str] = field(default_factory=list)
    planted_bps: Decimal | None = None
    expect: str | None = None
    meta: dict = field(default_factory=dict)


class _Planner:
    def __init__(self, spec: ScenarioSpec, universe: Universe, rng: random.Random):
        self.spec = spec
        self.universe = universe
        self.rng = rng
        self.fees = spec.fee_model()
        self.taker_rate = self.fees.rate(Role.TAKER)
        self.events: list[tuple[int, int, Order]] = []
        self.pending: list[_PendingLabel] = []
        self._seq = 0
        self._order_id = 1

    # -- low-level order placement --------------------------------------

    def _push(self, t: int, order: Order) -> None:
        self.events.append((t, self._seq, order))
        self._seq += 1

    def _order(self, symbol, side, typ, qty, price, t, owner, tag=None) -> Order:
        oid = self._order_id
        self._order_id += 1
        return Order(
            order_id=oid,
            symbol=symbol,
            side=side,
            type=typ,
            qty=qty,
            price=price,
            timestamp=t,
            owner=owner,
            tag=tag,
        )

    def rest(self, symbol, side, price, qty, t, owner="lp", tag=None) -> None:
        self._push(
            t, self._order(symbol, side, OrderType.LIMIT_MAKER, qty, price, t, owner, tag)
        )

    def take(self, symbol, side, price, qty, t, owner, tag=None) -> None:
        self._push(
            t, self._order(symbol, side, OrderType.LIMIT, qty, price, t, owner, tag)
        )

    def print_fill(self, symbol, price, qty, t, tag, sell=False, owner="ref") -> None:
        """Atomic maker+taker pair producing exactly one fill at ``price``."""
        maker_side = Side.BUY if sell else Side.SELL
        taker_side = Side.SELL if sell else Side.BUY
        self.rest(symbol, maker_side, price, qty, t, owner=owner)
        self.take(symbol, taker_side, price, qty, t, owner=owner, tag=tag)

    # -- planted-structure geometry --------------------------------------

    def _mid(self, symbol: str) -> Decimal:
        raw = self.spec.mids.get(symbol)
        if raw is None:
            raise ScenarioConfigError(f"no mid price configured for {symbol}")
        return D(raw)

    def _snap_price(self, listing, price: Decimal) -> Decimal:
        inc = listing.price_increment
        snapped = round_down(price + inc / 2, inc)
        if snapped <= 0:
            snapped = inc
        if snapped < listing.min_price or snapped > listing.max_price:
            raise ScenarioConfigError(
                f"{listing.symbol}: planted price {snapped} out of listing range"
            )
        return snapped

    @staticmethod
    def _leg_flows(direction, amount: Decimal, price: Decimal):
        """(from-coin spent, to-coin received) for a base-amount fill."""
        if direction.orientation is Orientation.FROM_IS_QUOTE:
            return amount * price, amount
        return amount, amount * price

    @staticmethod
    def _chain_amount(direction, flow_in: Decimal, price: Decimal) -> Decimal:
        """Largest grid-aligned base amount executable with ``flow_in``."""
        dx = direction.listing.qty_increment
        if direction.orientation is Orientation.FROM_IS_QUOTE:
            return round_down(div(flow_in, price), dx)
        return round_down(flow_in, dx)

    def _take_leg(self, direction, amount, price, t, owner, tag):
        """LP rest plus crossing take for one conversion leg."""
        symbol = direction.listing.symbol
        if direction.orientation is Orientation.FROM_IS_QUOTE:
            self.rest(symbol, Side.SELL, price, amount, t - 3)
            self.take(symbol, Side.BUY, price, amount, t, owner, tag)
        else:
            self.rest(symbol, Side.BUY, price, amount, t - 3)
            self.take(symbol, Side.SELL, price, amount, t, owner, tag)

    def _direct_ratio(self, direction, price: Decimal) -> Decimal:
        """to-per-from ratio implied by a direct-pair price."""
        if direction.orientation is Orientation.FROM_IS_QUOTE:
            return div(ONE, price)
        return price

    def _solve_leg_price(
        self, direction, flow_in: Decimal, spend: Decimal, required_out: Decimal
    ) -> Decimal:
        """Price at which converting ``flow_in`` yields ``required_out``.

        ``spend`` is the upstream from-coin amount the ratio is taken
        against; for a chained leg flow_in is the previous leg's output.
        """
        if direction.orientation is Orientation.FROM_IS_QUOTE:
            # output = flow_in / price
            price = div(flow_in, required_out)
        else:
            price = div(required_out, flow_in)
        return self._snap_price(direction.listing, price)

    # -- agent kinds -----------------------------------------------------

    def plan(self) -> None:
        for agent in self.spec.agents:
            kind = agent.get("kind")
            if kind == "noise":
                self._plan_noise(agent)
            elif kind == "triangular":
                self._plan_triangular_family(agent)
            elif kind == "indirect":
                self._plan_indirect_family(agent)
            elif kind == "competing":
                self._plan_competing_family(agent)
            elif kind == "decoy":
                self._plan_decoy_family(agent)
            else:
                raise ScenarioConfigError(f"unknown agent kind {kind!r}")
        self.events.sort(key=lambda e: (e[0], e[1]))

    def _plan_noise(self, agent: dict) -> None:
        pairs = agent.get("pairs", [])
        for sym in pairs:
            if sym not in self.universe.listings:
                raise ScenarioConfigError(f"noise pair {sym} not listed")
        count = int(agent.get("count", 0))
        start = int(agent.get("start_ms", 0))
        end = int(agent.get("end_ms", self.spec.duration_ms))
        if count and not pairs:
            raise ScenarioConfigError("noise agent needs at least one pair")
        qty_lo = D(str(agent.get("qty_lo", "0.1")))
        qty_hi = D(str(agent.get("qty_hi", "10")))
        jitter_bps = int(agent.get("price_jitter_bps", 100))
        name = agent.get("name", "noise")
        times = sorted(self.rng.randrange(start, max(end, start + 1)) for _ in range(count))
        for i, t in enumerate(times):
            sym = self.rng.choice(pairs)
            listing = self.universe.listings[sym]
            mid = self._mid(sym)
            jitter = self.rng.randint(-jitter_bps, jitter_bps)
            price = self._snap_price(listing, mid * (ONE + D(jitter) * D("1E-4")))
            dx = listing.qty_increment
            lo_units = int(div(qty_lo, dx))
            hi_units = max(int(div(qty_hi, dx)), lo_units + 1)
            qty = dx * self.rng.randint(max(lo_units, 1), hi_units)
            if qty < listing.min_qty:
                qty = max(listing.min_qty, dx)
            tag = f"{name}:{i}"
            self.print_fill(sym, price, qty, t, tag, sell=self.rng.random() < 0.5)
            self.pending.append(_PendingLabel(kind="NOISE", leg_tags=[tag]))

    # triangular / indirect bots ----------------------------------------

    def _family_times(self, agent: dict) -> list[int]:
        count = int(agent.get("count", 1))
        start = int(agent.get("start_ms", 1000))
        interval = int(agent.get("interval_ms", 500))
        return [start + k * interval for k in range(count)]

    def _profit_targets(self, agent: dict, key="profit_bps") -> list[Decimal]:
        raw = agent.get(key, "10")
        if isinstance(raw, list):
            return [D(str(x)) for x in raw]
        return [D(str(raw))]

    def _plan_indirect_family(self, agent: dict) -> None:
        coins = agent["coins"]
        if len(coins) != 3:
            raise ScenarioConfigError("indirect agent needs exactly three coins")
        latency = LatencyModel.from_dict(agent.get("latency"))
        targets = self._profit_targets(agent)
        qty = D(str(agent.get("quantity", "1")))
        qty_list = agent.get("quantities")
        name = agent.get("name", "ind")
        for k, t0 in enumerate(self._family_times(agent)):
            amount = D(str(qty_list[k % len(qty_list)])) if qty_list else qty
            plan = self._plan_indirect_one(
                f"{name}{k}", coins, t0, amount, targets[k % len(targets)], latency
            )
            self._plan_indirect_label(plan)

    def _plan_indirect_one(
        self,
        name: str,
        coins: list[str],
        t0: int,
        leg1_amount: Decimal,
        target_bps: Decimal,
        latency: LatencyModel,
        competing_price: Decimal | None = None,
        exit_latency_ms: int | None = None,
    ):
        """Plant one two-leg conversion plus its direct-pair reference.

        Returns bookkeeping used by the competing-cluster planner.
        """
        c1, c2, c3 = coins
        d1 = self.universe.direction(c1, c2)
        d2 = self.universe.direction(c2, c3)
        dd = self.universe.direction(c1, c3)
        p_direct = self._snap_price(dd.listing, self._mid(dd.listing.symbol))
        ratio_direct = self._direct_ratio(dd, p_direct)

        p1 = self._snap_price(d1.listing, self._mid(d1.listing.symbol))
        a1 = round_down(leg1_amount, d1.listing.qty_increment)
        if a1 <= 0:
            raise ScenarioConfigError(f"{name}: leg-1 amount below increment")
        spend1, flow2 = self._leg_flows(d1, a1, p1)

        if competing_price is not None:
            p2 = competing_price
            a2 = self._chain_amount(d2, flow2, p2)
        else:
            required_ratio = ratio_direct * (ONE + target_bps * D("1E-4"))
            required_ratio = div(required_ratio, ONE - self.taker_rate)
            required_out = required_ratio * spend1
            p2 = self._solve_leg_price(d2, flow2, spend1, required_out)
            a2 = self._chain_amount(d2, flow2, p2)
        if a2 <= 0:
            raise ScenarioConfigError(f"{name}: leg-2 amount below increment")
        _, flow3 = self._leg_flows(d2, a2, p2)

        gross_ratio = div(flow3, spend1)
        achieved = net_improvement_bps(gross_ratio, ratio_direct, self.taker_rate)

        lat = exit_latency_ms if exit_latency_ms is not None else latency.sample(self.rng)
        t1, t2 = t0, t0 + lat
        ref_tag = f"{name}:ref"
        self.print_fill(dd.listing.symbol, p_direct, self._ref_qty(dd.listing), t0 - 30, ref_tag + "a")
        self.print_fill(dd.listing.symbol, p_direct, self._ref_qty(dd.listing), t0 - 10, ref_tag + "b")
        self.pending.append(_PendingLabel(kind="NOISE", leg_tags=[ref_tag + "a"]))
        self.pending.append(_PendingLabel(kind="NOISE", leg_tags=[ref_tag + "b"]))
        self._take_leg(d1, a1, p1, t1, name, f"{name}:leg1")
        self._take_leg(d2, a2, p2, t2, name, f"{name}:leg2")
        return {
            "name": name,
            "legs": [f"{name}:leg1", f"{name}:leg2"],
            "achieved_bps": achieved,
            "latency_ms": lat,
            "q2": flow2,
            "spend1": spend1,
            "flow3": flow3,
            "p2": p2,
            "a2": a2,
            "t1": t1,
            "t2": t2,
            "ratio_direct": ratio_direct,
            "p1": p1,
            "a1": a1,
        }

    def _ref_qty(self, listing) -> Decimal:
        qty = max(listing.min_qty, listing.qty_increment * 11)
        return qty

    def _plan_indirect_label(self, plan: dict, kind="INDIRECT", extra_meta=None):
        meta = {
            "latencies_ms": [plan["latency_ms"]],
            "coins_q2": str(plan["q2"]),
        }
        if extra_meta:
            meta.update(extra_meta)
        self.pending.append(
            _PendingLabel(
                kind=kind,
                leg_tags=plan["legs"],
                planted_bps=plan["achieved_bps"],
                expect="INDIRECT",
                meta=meta,
            )
        )

    def _plan_triangular_family(self, agent: dict) -> None:
        coins = agent["coins"]
        if len(coins) != 3:
            raise ScenarioConfigError("triangular agent needs exactly three coins")
        latency = LatencyModel.from_dict(agent.get("latency"))
        targets = self._profit_targets(agent)
        qty = D(str(agent.get("quantity", "1")))
        name = agent.get("name", "tri")
        for k, t0 in enumerate(self._family_times(agent)):
            self._plan_triangular_one(
                f"{name}{k}", coins, t0, qty, targets[k % len(targets)], latency
            )

    def _plan_triangular_one(self, name, coins, t0, leg1_amount, target_bps, latency):
        c1, c2, c3 = coins
        d1 = self.universe.direction(c1, c2)
        d2 = self.universe.direction(c2, c3)
        d3 = self.universe.direction(c3, c1)

        p1 = self._snap_price(d1.listing, self._mid(d1.listing.symbol))
        p2 = self._snap_price(d2.listing, self._mid(d2.listing.symbol))
        a1 = round_down(leg1_amount, d1.listing.qty_increment)
        if a1 <= 0:
            raise ScenarioConfigError(f"{name}: leg-1 amount below increment")
        spend1, flow2 = self._leg_flows(d1, a1, p1)
        a2 = self._chain_amount(d2, flow2, p2)
        if a2 <= 0:
            raise ScenarioConfigError(f"{name}: leg-2 amount below increment")
        _, flow3 = self._leg_flows(d2, a2, p2)

        # price the closing leg so the cycle nets the target after three
        # taker fees
        one_net = ONE - self.taker_rate
        required_final = spend1 * (ONE + target_bps * D("1E-4"))
        required_final = div(required_final, one_net * one_net * one_net)
        p3 = self._solve_leg_price(d3, flow3, spend1, required_final)
        a3 = self._chain_amount(d3, flow3, p3)
        if a3 <= 0:
            raise ScenarioConfigError(f"{name}: leg-3 amount below increment")
        _, final = self._leg_flows(d3, a3, p3)
        achieved = q8(
            D("1E4") * (div(final, spend1) * one_net * one_net * one_net - ONE)
        )

        l1 = latency.sample(self.rng)
        l2 = latency.sample(self.rng)
        t1, t2, t3 = t0, t0 + l1, t0 + l1 + l2
        self._take_leg(d1, a1, p1, t1, name, f"{name}:leg1")
        self._take_leg(d2, a2, p2, t2, name, f"{name}:leg2")
        self._take_leg(d3, a3, p3, t3, name, f"{name}:leg3")
        self.pending.append(
            _PendingLabel(
                kind="TRIANGULAR",
                leg_tags=[f"{name}:leg1", f"{name}:leg2", f"{name}:leg3"],
                planted_bps=achieved,
                expect="TRIANGULAR",
                meta={"latencies_ms": [l1, l2]},
            )
        )

    def _plan_indirect_ref(self, plan):
        self._plan_indirect_label(plan)

    # competing clusters --------------------------------------------------

    def _plan_competing_family(self, agent: dict) -> None:
        coins = agent["coins"]
        if len(coins) != 3:
            raise ScenarioConfigError("competing agent needs exactly three coins")
        latency = LatencyModel.from_dict(agent.get("latency"))
        name = agent.get("name", "comp")
        winner_bps = D(str(agent.get("winner_bps", "10")))
        loser_bps = D(str(agent.get("loser_bps", "-12")))
        winner_qty = D(str(agent.get("winner_quantity", "2")))
        losers = agent.get("losers", [{"exit": "full", "quantity": "3.7"}])
        for k, t0 in enumerate(self._family_times(agent)):
            self._plan_competing_cluster(
                f"{name}{k}", coins, t0, winner_qty, winner_bps, loser_bps,
                losers, latency, cluster_id=f"{name}{k}",
            )

    def _plan_competing_cluster(
        self, name, coins, t0, winner_qty, winner_bps, loser_bps, losers,
        latency, cluster_id,
    ):
        c1, c2, c3 = coins
        d2 = self.universe.direction(c2, c3)

        # winner takes the whole best level of the shared second leg
        win_lat = 5 + (latency.sample(self.rng) % 26)  # leg-2 at t0+[5,30]
        win = self._plan_indirect_one(
            f"{name}w", coins, t0, winner_qty, winner_bps, latency,
            exit_latency_ms=win_lat,
        )
        self._plan_indirect_label(
            win, kind="COMPETING_WINNER", extra_meta={"cluster": cluster_id}
        )
        t_capacity_gone = win["t2"]

        # the worse level every loser exits into: solve its price from the
        # loser target, using the winner's geometry as the baseline
        loser_ratio = win["ratio_direct"] * (ONE + loser_bps * D("1E-4"))
        loser_ratio = div(loser_ratio, ONE - self.taker_rate)

        for j, loser in enumerate(losers):
            lname = f"{name}l{j}"
            lqty = D(str(loser.get("quantity", "3.7")))
            exit_kind = loser.get("exit", "full")
            delta = 6 * (j + 1)  # first legs inside the competition window
            t1 = t0 + delta
            stagger = 18 * j  # keep losers' exit prints from interleaving
            if exit_kind == "full":
                # single exit on the shared pair at the worse level, late
                # enough to follow the winner but within one detection window
                exit_lat = max(45, t_capacity_gone + 2 - t1) + stagger
                plan = self._plan_indirect_one(
                    lname, coins, t1, lqty, loser_bps, latency,
                    exit_latency_ms=int(exit_lat),
                )
                if plan["t2"] <= t_capacity_gone:
                    raise ScenarioConfigError(f"{lname}: exit precedes winner leg")
                self._plan_indirect_label(
                    plan,
                    kind="COMPETING_LOSER",
                    extra_meta={
                        "cluster": cluster_id,
                        "exit_kind": "FULL_EXIT",
                        "exit_legs": [plan["legs"][1]],
                        "q1": str(plan["q2"]),
                        "exit_coins": 1,
                        "loss_bps": str(self._loss_bps_full(win, plan)),
                    },
                )
            elif exit_kind == "partial":
                self._plan_partial_loser(
                    lname, coins, t1, lqty, loser, latency, win,
                    t_capacity_gone, cluster_id, loser_ratio, stagger,
                )
            else:
                raise ScenarioConfigError(f"unknown exit kind {exit_kind!r}")

    def _loss_bps_full(self, win, plan) -> Decimal:
        """Realized loss of a full exit vs the intended (winner) rate in bps."""
        fair = q8(div(win["flow3"], win["spend1"]))
        got = q8(div(plan["flow3"], plan["spend1"]))
        return q8(D("1E4") * (ONE - div(got, fair)))

    def _plan_partial_loser(
        self, name, coins, t1, lqty, loser, latency, win,
        t_capacity_gone, cluster_id, loser_ratio, stagger=0,
    ):
        """Leg 1 acquires c2; the exit splits it across the shared pair's
        worse level and extra coins, summing exactly to the acquired q."""
        c1, c2, c3 = coins
        d1 = self.universe.direction(c1, c2)
        d2 = self.universe.direction(c2, c3)
        extra_coins = loser.get("extra_coins", [])
        parts = int(loser.get("parts", 1 + len(extra_coins)))
        if parts < 2:
            raise ScenarioConfigError(f"{name}: partial exit needs >= 2 parts")
        if parts - 1 > len(extra_coins) and parts > 1 and not extra_coins:
            raise ScenarioConfigError(f"{name}: partial exit needs extra_coins")

        p1 = self._snap_price(d1.listing, self._mid(d1.listing.symbol))
        a1 = round_down(lqty, d1.listing.qty_increment)
        spend1, q1 = self._leg_flows(d1, a1, p1)

        exit_dirs = [d2] + [
            self.universe.direction(c2, d) for d in extra_coins[: parts - 1]
        ]
        for dx_dir in exit_dirs:
            if dx_dir.orientation is not Orientation.FROM_IS_BASE:
                raise ScenarioConfigError(
                    f"{name}: partial exits need {c2}-base listings for exact sums"
                )
        # split q1 into grid-aligned parts that sum exactly
        dx = max(d.listing.qty_increment for d in exit_dirs)
        share = round_down(div(q1, D(len(exit_dirs))), dx)
        amounts = [share] * (len(exit_dirs) - 1)
        amounts.append(q1 - share * (len(exit_dirs) - 1))
        for dx_dir, amt in zip(exit_dirs, amounts):
            if amt <= 0 or amt % dx_dir.listing.qty_increment != 0:
                raise ScenarioConfigError(f"{name}: exit amount {amt} off grid")

        # the shared-pair exit executes at the loser-target worse level; the
        # extra-coin exits execute slightly better so splitting pays
        p2_loss = self._solve_leg_price(d2, q1, spend1, loser_ratio * spend1)
        direct_sym = self.universe.direction(c1, c3).listing.symbol

        self._take_leg(d1, a1, p1, t1, name, f"{name}:leg1")
        exit_tags = []
        exit_info = []
        base_t = max(t1 + 55, t_capacity_gone + 2) + stagger
        for i, (dx_dir, amt) in enumerate(zip(exit_dirs, amounts)):
            t_exit = base_t + 5 * i
            tag = f"{name}:exit{i}"
            if i == 0:
                price = p2_loss
            else:
                # extra-coin rate: value c2 -> d_i at a mildly better
                # c3-equivalent than the worse shared level
                rho = self._mid_ratio(dx_dir)  # d_i per c2 at its mid
                price = self._snap_price(dx_dir.listing, rho)
                # plant the d_i -> c3 reference so exits can be valued
                v_dir = self.universe.direction(dx_dir.to.symbol, c3)
                v_price = self._snap_price(
                    v_dir.listing, self._mid(v_dir.listing.symbol)
                )
                rtag = f"{name}:vref{i}"
                self.print_fill(
                    v_dir.listing.symbol, v_price, self._ref_qty(v_dir.listing),
                    t_exit - 20, rtag,
                )
                self.pending.append(_PendingLabel(kind="NOISE", leg_tags=[rtag]))
            self._take_leg(dx_dir, amt, price, t_exit, name, tag)
            exit_tags.append(tag)
            exit_info.append({"coin": dx_dir.to.symbol, "amount": str(amt)})

        self.pending.append(
            _PendingLabel(
                kind="COMPETING_LOSER",
                leg_tags=[f"{name}:leg1"] + exit_tags,
                planted_bps=None,
                expect=None,
                meta={
                    "cluster": cluster_id,
                    "exit_kind": "PARTIAL_EXIT",
                    "exit_legs": exit_tags,
                    "q1": str(q1),
                    "exit_coins": len({e["coin"] for e in exit_info}),
                    "exits": exit_info,
                    "direct_symbol": direct_sym,
                },
            )
        )

    def _mid_ratio(self, direction) -> Decimal:
        return self._mid(direction.listing.symbol)

    # decoys ---------------------------------------------------------------

    def _plan_decoy_family(self, agent: dict) -> None:
        coins = agent["coins"]
        variant = agent.get("variant", "late")
        latency_ms = int(agent.get("latency_ms", 60))
        qty = D(str(agent.get("quantity", "1")))
        name = agent.get("name", "decoy")
        latency = LatencyModel.from_dict(agent.get("latency"))
        for k, t0 in enumerate(self._family_times(agent)):
            self._plan_decoy_one(f"{name}{k}", coins, t0, qty, variant, latency_ms, latency)

    def _plan_decoy_one(self, name, coins, t0, qty, variant, latency_ms, latency):
        c1, c2, c3 = coins
        d1 = self.universe.direction(c1, c2)
        d2 = self.universe.direction(c2, c3)
        p1 = self._snap_price(d1.listing, self._mid(d1.listing.symbol))
        p2 = self._snap_price(d2.listing, self._mid(d2.listing.symbol))
        a1 = round_down(qty, d1.listing.qty_increment)
        _, flow2 = self._leg_flows(d1, a1, p1)
        a2 = self._chain_amount(d2, flow2, p2)
        meta = {"variant": variant}
        if variant == "late":
            self._take_leg(d1, a1, p1, t0, name, f"{name}:leg1")
            self._take_leg(d2, a2, p2, t0 + latency_ms, name, f"{name}:leg2")
        elif variant == "mismatch":
            skew = round_down(a2 / 2, d2.listing.qty_increment)
            self._take_leg(d1, a1, p1, t0, name, f"{name}:leg1")
            self._take_leg(d2, max(skew, d2.listing.qty_increment), p2, t0 + 20, name, f"{name}:leg2")
        elif variant == "maker_middle":
            self._take_leg(d1, a1, p1, t0, name, f"{name}:leg1")
            # bot rests the second leg; lp crosses it, so the trade prints
            # with the opposite taker direction
            symbol = d2.listing.symbol
            if d2.orientation is Orientation.FROM_IS_BASE:
                self.rest(symbol, Side.SELL, p2, a2, t0 + 10, owner=name, tag=f"{name}:leg2")
                self.take(symbol, Side.BUY, p2, a2, t0 + 20, owner="lp", tag=f"{name}:cross")
            else:
                self.rest(symbol, Side.BUY, p2, a2, t0 + 10, owner=name, tag=f"{name}:leg2")
                self.take(symbol, Side.SELL, p2, a2, t0 + 20, owner="lp", tag=f"{name}:cross")
        else:
            raise ScenarioConfigError(f"unknown decoy variant {variant!r}")
        self.pending.append(
            _PendingLabel(
                kind="NOISE",
                leg_tags=[f"{name}:leg1"],
                meta=meta,
            )
        )
        self.pending.append(
            _PendingLabel(
                kind="NOISE",
                leg_tags=[f"{name}:leg2"] if variant != "maker_middle" else [f"{name}:cross"],
                meta=meta,
            )
        )

    # -- label assembly ----------------------------------------------------

    def build_labels(self, trades: list[SimTrade]) -> list[GroundTruthLabel]:
        by_tag: dict[str, list[SimTrade]] = {}
        for tr in trades:
            if tr.taker_tag:
                by_tag.setdefault(tr.taker_tag, []).append(tr)
        labels = []
        for pending in self.pending:
            ids: list[int] = []
            for tag in pending.leg_tags:
                fills = by_tag.get(tag)
                if not fills:
                    raise ConsistencyError(f"planted order {tag} produced no fill")
                if len(fills) != 1 and pending.kind != "NOISE":
                    raise ConsistencyError(f"planted order {tag} split into {len(fills)} fills")
                ids.extend(f.id for f in fills)
            meta = dict(pending.meta)
            if "exit_legs" in meta:
                meta["exit_trade_ids"] = [
                    by_tag[tag][0].id for tag in meta.pop("exit_legs")
                ]
            labels.append(
                GroundTruthLabel(
                    kind=pending.kind,
                    trade_ids=ids,
                    planted_bps=pending.planted_bps,
                    expect=pending.expect,
                    meta=meta,
                )
            )
        labels.sort(key=lambda l: l.trade_ids[0] if l.trade_ids else 0)
        return labels


def run_scenario(spec: ScenarioSpec) -> ScenarioOutput:
    """Plan, execute, and label one scenario deterministically."""
    from ..market import load_listings  # local to avoid import cycle at top
    import io

    universe = load_listings(io.StringIO(json.dumps(spec.listings)))
    rng = random.Random(spec.seed)
    engine = MatchingEngine(universe, spec.fee_model())
    planner = _Planner(spec, universe, rng)
    planner.plan()

    snapshots: list[SnapshotRow] = []
    ticks = list(range(0, spec.duration_ms + 1, spec.snapshot_cadence_ms))
    tick_idx = 0
    for t, _, order in planner.events:
        while tick_idx < len(ticks) and ticks[tick_idx] < t:
            snapshots.extend(engine.snapshot(ticks[tick_idx]))
            tick_idx += 1
        engine.submit_order(order)
    while tick_idx < len(ticks):
        snapshots.extend(engine.snapshot(ticks[tick_idx]))
        tick_idx += 1

    labels = planner.build_labels(engine.trades)
    return ScenarioOutput(
        trades=engine.trades,
        labels=labels,
        snapshots=snapshots,
        universe=universe,
        spec=spec,
    )


# -- file writers ----------------------------------------------------------


def format_bool(v: bool) -> str:
    return "true" if v else "false"


def write_trades_csv(trades: Iterable[SimTrade], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRADE_COLUMNS) + "\n")
        for tr in trades:
            fh.write(
                f"{tr.id},{tr.exchange},{tr.symbol},{tr.date},"
                f"{tr.price},{tr.amount},{format_bool(tr.sell)}\n"
            )


def write_snapshots(rows: Iterable[SnapshotRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        for r in rows:
            fh.write(f"{r.symbol},{r.date},{r.type},{r.amount},{r.price}\n")


def write_labels(labels: Iterable[GroundTruthLabel], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(json.dumps(label.to_json(), sort_keys=True) + "\n")


def load_labels(path) -> list[GroundTruthLabel]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(GroundTruthLabel.from_json(json.loads(line)))
    return out
