"""Cycle capacity, balances, gain, and conversion proceeds against hand
evaluations, the closed form, and the leg-replay / binary-search oracles."""

import random
from decimal import Decimal

import pytest

from arblens import (
    BookSet,
    BookTop,
    ConversionPath,
    Cycle,
    CycleClass,
    FeeModel,
    Universe,
    compare_conversions,
    conversion_proceeds,
    cycle_balances,
    cycle_capacity,
    cycle_gain,
    enumerate_cycles,
)
from arblens.cycles import path_capacity
from arblens.errors import (
    CapacityExceededError,
    InvalidComparisonError,
    NoLiquidityError,
)
from arblens.market import BnbRates
from arblens.numeric import D, ONE

from conftest import listing, top
from genbooks import random_triangle
from oracles import capacity_by_binary_search, gain_by_leg_replay

NO_FEE = FeeModel(maker_bps=D("0"), taker_bps=D("0"), bnb_flat=D("0"))
NO_RATES = BnbRates()
# fine enough that 8-decimal quantities never strand a residue
EXACT_DX = "1E-30"


def triangle_universe(dx=EXACT_DX, coins=("AAA", "BBB", "CCC")) -> Universe:
    a, b, c = coins
    return Universe(
        [
            listing(a + b, a, b, dx=dx),
            listing(b + c, b, c, dx=dx),
            listing(c + a, c, a, dx=dx),
        ]
    )


def base_oriented_books(universe, prices, qtys) -> BookSet:
    tops = {}
    for sym, price, qty in zip(universe.listings, prices, qtys):
        tops[sym] = top(bid=price, bid_qty=qty, ask=price, ask_qty=qty)
    return BookSet(universe, tops)


class TestCycleCapacity:
    def test_hand_candidates(self):
        uni = triangle_universe()
        books = base_oriented_books(uni, ["2", "1", "0.55"], ["10", "30", "40"])
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        # candidates: 10/1, 30/2, 40/2 -> 10
        assert cycle_capacity(cycle, books) == 10

    def test_first_leg_binds(self):
        uni = triangle_universe()
        books = base_oriented_books(uni, ["1", "1", "1"], ["1", "1000000", "1000000"])
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        assert cycle_capacity(cycle, books) == 1

    def test_empty_level_gives_zero(self):
        uni = triangle_universe()
        books = base_oriented_books(uni, ["1", "1", "1"], ["5", "0", "5"])
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        assert cycle_capacity(cycle, books) == 0

    def test_missing_leg_raises(self):
        uni = triangle_universe()
        books = base_oriented_books(uni, ["1", "1", "1"], ["5", "5", "5"])
        del books.tops["CCCAAA"]
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        with pytest.raises(NoLiquidityError):
            cycle_capacity(cycle, books)

    def test_matches_binary_search_oracle(self):
        rng = random.Random(20240917)
        for _ in range(100):
            cycle, books, _, _ = random_triangle(rng)
            fast = cycle_capacity(cycle, books)
            slow = capacity_by_binary_search(cycle, books)
            assert abs(fast - slow) <= D("1E-8"), (fast, slow)


class TestCycleBalances:
    def test_hand_recurrence(self):
        uni = triangle_universe()
        books = base_oriented_books(
            uni, ["0.5", "4", "0.55"], ["100000", "100000", "100000"]
        )
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        assert cycle_balances(D("100"), cycle, books) == [100, 50, 200, 110]

    def test_zero_quantity(self):
        uni = triangle_universe()
        books = base_oriented_books(uni, ["1", "1", "1"], ["5", "5", "5"])
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        assert cycle_balances(D("0"), cycle, books) == [0, 0, 0, 0]

    def test_capacity_exceeded(self):
        uni = triangle_universe()
        books = base_oriented_books(uni, ["1", "1", "1"], ["5", "5", "5"])
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        with pytest.raises(CapacityExceededError):
            cycle_balances(D("5.00000001"), cycle, books)

    def test_coarse_increment_matches_leg_replay(self):
        # dx forces residue on the middle leg; balances must follow the
        # same floor-and-convert steps a leg-by-leg execution would.
        uni = triangle_universe(dx="0.1")
        books = base_oriented_books(uni, ["0.5", "4", "0.55"], ["1000", "1000", "1000"])
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        got = cycle_balances(D("100.07"), cycle, books)
        # leg 1: floor(100.07) -> 100.0 sent, q2 = 50.0; leg 2: q3 = 200.0;
        # leg 3: q4 = 110.0
        assert got == [D("100.0"), D("50.00"), D("200.000"), D("110.00000")]


class TestCycleGain:
    def test_closed_form_product_above_one(self):
        uni = triangle_universe()
        books = base_oriented_books(
            uni, ["0.5", "4", "0.55"], ["100000", "100000", "100000"]
        )
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        out = cycle_gain(D("100"), cycle, books, NO_RATES, NO_FEE)
        assert out.gain == 10
        assert out.gross_delta == 10
        assert out.residual_value == 0
        assert out.fee_value == 0
        assert out.classification is CycleClass.OPEN

    def test_break_even_is_arbitrage_free(self):
        uni = triangle_universe()
        books = base_oriented_books(
            uni, ["0.5", "4", "0.5"], ["100000", "100000", "100000"]
        )
        cycle = Cycle.over(uni, ["AAA", "BBB", "CCC", "AAA"])
        out = cycle_gain(D("100"), cycle, books, NO_RATES, NO_FEE)
        assert out.gain == 0
        assert out.classification is CycleClass.ARBITRAGE_FREE

    def test_flat_fee_hand_value(self):
        # BNB-based cycle, unit rates: G = 1 - 5e-4 * (100 + 100 + 101)
        uni = triangle_universe(coins=("BNB", "XXX", "YYY"))
        books = base_oriented_books(
            uni, ["1", "1", "1.01"], ["100000", "100000", "100000"]
        )
        cycle = Cycle.over(uni, ["BNB", "XXX", "YYY", "BNB"])
        rates = BnbRates.direct({"XXX": D("1"), "YYY": D("1"), "BNB": D("1")})
        fee = FeeModel(bnb_flat=D("5E-4"))
        out = cycle_gain(D("100"), cycle, books, rates, fee)
        assert out.fee_value == D("0.1505")
        assert out.gain == D("0.8495")
        assert out.classification is CycleClass.OPEN

    def test_gain_identity_holds(self):
        rng = random.Random(7)
        for _ in range(50):
            cycle, books, rates, fee = random_triangle(rng)
            q = cycle_capacity(cycle, books)
            out = cycle_gain(q, cycle, books, rates, fee)
            assert out.gain == out.gross_delta + out.residual_value - out.fee_value

    def test_matches_leg_replay_oracle(self):
        rng = random.Random(20240918)
        for _ in range(200):
            cycle, books, rates, fee = random_triangle(rng)
            cap = cycle_capacity(cycle, books)
            q = (cap * D(f"0.{rng.randint(10, 99)}")).quantize(D("1E-8"))
            via_formula = cycle_gain(q, cycle, books, rates, fee).gain
            via_replay = gain_by_leg_replay(q, cycle, books, rates, fee)
            denom = max(abs(via_formula), abs(via_replay), ONE)
            assert abs(via_formula - via_replay) / denom <= D("1E-9")

    def test_zero_residual_closed_form_exact(self):
        # With residuals forced to zero the gain must equal
        # Q(prod(psi) - 1) - f * sum_i Q * prod_{j<=i}(psi_j) * b_{i+1} * psi_B1
        rng = random.Random(99)
        for _ in range(50):
            cycle, books, rates, fee = random_triangle(
                rng, zero_spread=True, force_dx=EXACT_DX
            )
            q = D(f"{rng.randint(1, 500)}") * D("0.01")
            cap = cycle_capacity(cycle, books)
            if q > cap:
                q = cap.quantize(D("1E-8"), rounding="ROUND_DOWN")
            psis = [
                books.ratio(d.frm.symbol, d.to.symbol) for d in cycle.directions
            ]
            prod = ONE
            fee_sum = D("0")
            psi_b1 = books.ratio("BNB", "AAA")
            for i, d in enumerate(cycle.directions):
                prod *= psis[i]
                fee_sum += q * prod * rates.rate(d.to) * psi_b1
            expected = q * (ONE * psis[0] * psis[1] * psis[2] - ONE) - fee.bnb_flat * fee_sum
            out = cycle_gain(q, cycle, books, rates, fee)
            assert out.residual_value == 0
            assert out.gain == expected


class TestConversionProceeds:
    def test_single_leg_degenerate(self):
        uni = Universe([listing("AAABBB", "AAA", "BBB", dx=EXACT_DX)])
        books = BookSet(uni, {"AAABBB": top(bid="2", bid_qty=100, ask="2", ask_qty=100)})
        path = ConversionPath.over(uni, ["AAA", "BBB"])
        assert conversion_proceeds(D("3"), path, books, NO_RATES, NO_FEE) == 6

    def test_two_leg_hand_value(self):
        uni = Universe(
            [
                listing("AAABBB", "AAA", "BBB", dx=EXACT_DX),
                listing("BBBCCC", "BBB", "CCC", dx=EXACT_DX),
            ]
        )
        books = BookSet(
            uni,
            {
                "AAABBB": top(bid="2", bid_qty=1000, ask="2", ask_qty=1000),
                "BBBCCC": top(bid="3.05", bid_qty=1000, ask="3.05", ask_qty=1000),
            },
        )
        path = ConversionPath.over(uni, ["AAA", "BBB", "CCC"])
        assert conversion_proceeds(D("1"), path, books, NO_RATES, NO_FEE) == D("6.10")

    def test_monotone_in_quantity(self):
        rng = random.Random(5150)
        for _ in range(25):
            cycle, books, rates, fee = random_triangle(rng)
            uni = books.universe
            path = ConversionPath.over(uni, ["AAA", "BBB", "CCC"])
            cap = path_capacity(path, books)
            qs = sorted(
                (cap * D(f"0.{rng.randint(10, 99)}")).quantize(D("1E-8"))
                for _ in range(4)
            )
            prs = [conversion_proceeds(q, path, books, rates, fee) for q in qs]
            assert all(a <= b for a, b in zip(prs, prs[1:]))

    def test_capacity_exceeded(self):
        uni = Universe([listing("AAABBB", "AAA", "BBB", dx=EXACT_DX)])
        books = BookSet(uni, {"AAABBB": top(bid="2", bid_qty=10, ask="2", ask_qty=10)})
        path = ConversionPath.over(uni, ["AAA", "BBB"])
        with pytest.raises(CapacityExceededError):
            conversion_proceeds(D("10.5"), path, books, NO_RATES, NO_FEE)


class TestCompareConversions:
    def _market(self, indirect_prices=("2", "3.048535"), direct_price="6.0"):
        uni = Universe(
            [
                listing("AAABBB", "AAA", "BBB", dx=EXACT_DX),
                listing("BBBCCC", "BBB", "CCC", dx=EXACT_DX),
                listing("AAACCC", "AAA", "CCC", dx=EXACT_DX),
            ]
        )
        p1, p2 = indirect_prices
        books = BookSet(
            uni,
            {
                "AAABBB": top(bid=p1, bid_qty=1000, ask=p1, ask_qty=1000),
                "BBBCCC": top(bid=p2, bid_qty=10000, ask=p2, ask_qty=10000),
                "AAACCC": top(
                    bid=direct_price, bid_qty=1000, ask=direct_price, ask_qty=1000
                ),
            },
        )
        v1 = ConversionPath.over(uni, ["AAA", "BBB", "CCC"])
        v2 = ConversionPath.over(uni, ["AAA", "CCC"])
        return v1, v2, books

    def test_indirect_beats_direct(self):
        # 2 * 3.048535 = 6.09707 vs 6.0 direct
        v1, v2, books = self._market()
        verdict = compare_conversions(v1, v2, books, NO_RATES, NO_FEE)
        assert verdict.v1_profitable
        assert verdict.pr1 > verdict.pr2

    def test_identical_paths_not_strictly_profitable(self):
        v1, v2, books = self._market()
        verdict = compare_conversions(v2, v2, books, NO_RATES, NO_FEE)
        assert not verdict.v1_profitable
        assert verdict.pr1 == verdict.pr2

    def test_zero_capacity_degenerate(self):
        v1, v2, books = self._market()
        books.tops["AAACCC"] = top(bid="6.0", bid_qty=0, ask="6.0", ask_qty=0)
        verdict = compare_conversions(v1, v2, books, NO_RATES, NO_FEE)
        assert verdict.q_used == 0
        assert verdict.pr1 == verdict.pr2 == 0
        assert not verdict.v1_profitable

    def test_endpoint_mismatch(self):
        v1, v2, books = self._market()
        flipped = ConversionPath.over(books.universe, ["CCC", "AAA"])
        with pytest.raises(InvalidComparisonError):
            compare_conversions(v1, flipped, books, NO_RATES, NO_FEE)


class TestEnumerateCycles:
    def test_fully_connected_three_coins(self):
        uni = triangle_universe()
        cycles, counts = enumerate_cycles(uni)
        assert len(cycles) == 6
        assert counts["TOTAL"] == 6
        assert counts["OTHER"] == 6  # AAA/BBB/CCC are not anchors

    def test_missing_pair_breaks_all_triangles(self):
        uni = Universe(
            [
                listing("AAABBB", "AAA", "BBB"),
                listing("BBBCCC", "BBB", "CCC"),
            ]
        )
        cycles, counts = enumerate_cycles(uni)
        assert cycles == []
        assert counts["TOTAL"] == 0

    def test_bucket_schema(self):
        uni = triangle_universe(coins=("BTC", "ETH", "USDT"))
        _, counts = enumerate_cycles(uni)
        assert set(counts) == {"BTC", "BNB", "ALTS", "STABLE", "OTHER", "TOTAL"}
        assert counts["BTC"] == 2
        assert counts["ALTS"] == 2
        assert counts["STABLE"] == 2
        assert counts["TOTAL"] == 6

    def test_exhaustive_against_definition(self):
        # five coins, some pairs missing: counts must equal brute force over
        # ordered triples
        rng = random.Random(3)
        coins = ["BTC", "BNB", "ETH", "USDT", "ZZZ"]
        pairs = []
        for i, a in enumerate(coins):
            for b in coins[i + 1 :]:
                if rng.random() < 0.7:
                    pairs.append(listing(a + b, a, b))
        uni = Universe(pairs)
        cycles, counts = enumerate_cycles(uni)
        brute = 0
        for a in coins:
            for b in coins:
                for c in coins:
                    if len({a, b, c}) != 3:
                        continue
                    if (
                        uni.listing_between(a, b)
                        and uni.listing_between(b, c)
                        and uni.listing_between(c, a)
                    ):
                        brute += 1
        assert counts["TOTAL"] == brute == len(cycles)

    def test_only_triangular_supported(self):
        with pytest.raises(ValueError):
            enumerate_cycles(triangle_universe(), n=4)
