"""Single-conversion primitives against the appendix definitions and the
exchange worked example."""

from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from arblens import (
    BnbRates,
    BookTop,
    FeeModel,
    Orientation,
    Universe,
    bid_ask_spread,
    bnb_rate,
    convert_leg,
    exchange_ratio,
    pair_capacity,
    residual,
    round_down,
    trade_quantity,
)
from arblens.errors import (
    BelowMinimumError,
    InvalidIncrementError,
    MissingRateError,
    NoLiquidityError,
)
from arblens.market import Role
from arblens.numeric import D, ONE, ZERO

from conftest import listing, top


decimals_8dp = st.decimals(
    min_value="0", max_value="1000000", places=8, allow_nan=False, allow_infinity=False
)
increments = st.sampled_from(
    [D("0.00000001"), D("0.0001"), D("0.001"), D("0.05"), D("1"), D("2.5")]
)


class TestRoundDown:
    def test_worked_example_residue_boundary(self):
        assert round_down(D("0.002887334873"), D("0.00000001")) == D("0.00288733")

    def test_exact_multiple(self):
        assert round_down(D("0.153"), D("0.001")) == D("0.153")

    def test_below_one_increment(self):
        assert round_down(D("0.0009"), D("0.001")) == 0

    def test_rejects_bad_increment(self):
        with pytest.raises(InvalidIncrementError):
            round_down(D("1"), D("0"))
        with pytest.raises(InvalidIncrementError):
            round_down(D("1"), D("-0.01"))

    @given(x=decimals_8dp, inc=increments)
    def test_floor_contract(self, x, inc):
        out = round_down(x, inc)
        assert out <= x
        assert x - out < inc
        assert out % inc == 0

    def test_negative_input_floors(self):
        assert round_down(D("-0.5"), D("0.3")) == D("-0.6")


class TestExchangeRatio:
    def test_from_base_is_bid(self, ethbtc_universe):
        d = ethbtc_universe.direction("ETH", "BTC")
        assert d.orientation is Orientation.FROM_IS_BASE
        assert exchange_ratio(d, top(bid="0.018876", ask="0.018880")) == D("0.018876")

    def test_from_quote_is_reciprocal_ask(self, ethbtc_universe):
        d = ethbtc_universe.direction("BTC", "ETH")
        assert d.orientation is Orientation.FROM_IS_QUOTE
        assert exchange_ratio(d, top(bid="0.01", ask="0.02")) == D("50")

    def test_zero_spread_round_trip(self, ethbtc_universe):
        t = top(bid="0.02", bid_qty=1, ask="0.02", ask_qty=1)
        fwd = exchange_ratio(ethbtc_universe.direction("ETH", "BTC"), t)
        back = exchange_ratio(ethbtc_universe.direction("BTC", "ETH"), t)
        assert fwd * back == ONE

    def test_missing_side_raises(self, ethbtc_universe):
        with pytest.raises(NoLiquidityError):
            exchange_ratio(ethbtc_universe.direction("BTC", "ETH"), top(bid="0.01"))

    @given(
        bid=st.decimals(min_value="0.0001", max_value="10000", places=8),
        spread=st.decimals(min_value="0", max_value="1", places=8),
    )
    def test_round_trip_product_bounded_by_one(self, bid, spread):
        uni = Universe([listing("ETHBTC", "ETH", "BTC")])
        t = top(bid=bid, ask=bid + spread)
        fwd = exchange_ratio(uni.direction("ETH", "BTC"), t)
        back = exchange_ratio(uni.direction("BTC", "ETH"), t)
        product = fwd * back
        # quotient carries 50 significant digits, so the zero-spread case
        # sits within one part in 1e-40 of exactly 1
        assert product <= ONE + D("1E-40")
        if spread > 0:
            assert product < ONE


class TestPairCapacity:
    def test_from_quote_is_ask_notional(self, ethbtc_universe):
        d = ethbtc_universe.direction("BTC", "ETH")
        assert pair_capacity(d, top(ask="0.02", ask_qty=100)) == D("2.0")

    def test_from_base_is_bid_quantity(self, ethbtc_universe):
        d = ethbtc_universe.direction("ETH", "BTC")
        assert pair_capacity(d, top(bid="0.02", bid_qty=7)) == 7

    def test_empty_level_is_zero(self, ethbtc_universe):
        d = ethbtc_universe.direction("BTC", "ETH")
        assert pair_capacity(d, top(ask="0.02", ask_qty=0)) == 0


class TestBidAskSpread:
    def test_subtraction(self, ethbtc_universe):
        d = ethbtc_universe.direction("ETH", "BTC")
        assert bid_ask_spread(d, top(bid="0.018876", ask="0.018880")) == D("0.000004")

    def test_zero_spread(self, ethbtc_universe):
        d = ethbtc_universe.direction("ETH", "BTC")
        assert bid_ask_spread(d, top(bid="1", ask="1")) == 0

    def test_orientation_symmetry(self, ethbtc_universe):
        t = top(bid="0.018876", ask="0.018880")
        fwd = ethbtc_universe.direction("ETH", "BTC")
        assert bid_ask_spread(fwd, t) == bid_ask_spread(fwd.reversed(), t)

    def test_one_side_missing(self, ethbtc_universe):
        with pytest.raises(NoLiquidityError):
            bid_ask_spread(ethbtc_universe.direction("ETH", "BTC"), top(ask="1"))


class TestTradeQuantity:
    def test_worked_example_division(self, ethbtc_universe):
        d = ethbtc_universe.direction("BTC", "ETH")
        got = trade_quantity(d, D("0.002888028"), top(ask="0.018876"))
        assert got == D("0.153")

    def test_from_base_passthrough(self, ethbtc_universe):
        d = ethbtc_universe.direction("ETH", "BTC")
        assert trade_quantity(d, D("5"), top(bid="1")) == 5

    def test_zero(self, ethbtc_universe):
        d = ethbtc_universe.direction("BTC", "ETH")
        assert trade_quantity(d, ZERO, top(ask="1")) == 0


class TestResidual:
    def test_worked_example_btc_residue(self):
        # BTC as base of a satoshi-grid pair: the stated 12-digit BTC amount
        # strands 4.873e-9 below the 1e-8 increment.
        uni = Universe([listing("BTCUSDT", "BTC", "USDT", dx="0.00000001")])
        d = uni.direction("BTC", "USDT")
        t = top(bid="9000.1", bid_qty=10, ask="9000.2", ask_qty=10)
        assert residual(d, D("0.002887334873"), t) == D("0.000000004873")

    def test_exact_multiple_has_no_residue(self, ethbtc_universe):
        d = ethbtc_universe.direction("ETH", "BTC")
        assert residual(d, D("0.153"), top(bid="0.018876")) == 0

    @given(q=decimals_8dp)
    def test_strip_then_convert_leaves_zero_base_side(self, q):
        uni = Universe([listing("ETHBTC", "ETH", "BTC", dx="0.001")])
        d = uni.direction("ETH", "BTC")
        t = top(bid="0.018876", ask="0.018880")
        r = residual(d, q, t)
        assert r >= 0
        assert residual(d, q - r, t) == 0

    @given(q=decimals_8dp)
    def test_strip_then_convert_leaves_zero_quote_side(self, q):
        uni = Universe([listing("ETHBTC", "ETH", "BTC", dx="0.001")])
        d = uni.direction("BTC", "ETH")
        t = top(bid="0.018876", ask="0.018880")
        r = residual(d, q, t)
        assert r >= 0
        assert residual(d, q - r, t) == 0


class TestConvertLeg:
    """The exchange worked example, both sides, at the lowest fee tier."""

    def test_taker_side_eth_to_btc(self, ethbtc_universe, lowest_tier_fees):
        d = ethbtc_universe.direction("ETH", "BTC")
        t = top(bid="0.018876", bid_qty=10, ask="0.018880", ask_qty=10)
        leg = convert_leg(D("0.153"), d, t, lowest_tier_fees, Role.TAKER)
        assert leg.gross == D("0.002888028")
        assert leg.net == D("0.00288733487328")
        # printed in the example as 0.002887334873
        assert leg.net.quantize(D("1E-12")) == D("0.002887334873")
        assert leg.fee_amount == D("0.00000069312672")
        assert leg.fee_amount.quantize(D("1E-9")) == D("6.93E-7")
        assert leg.residual == 0

    def test_maker_side_btc_to_eth(self, ethbtc_universe, lowest_tier_fees):
        d = ethbtc_universe.direction("BTC", "ETH")
        t = top(bid="0.018876", bid_qty=10, ask="0.018876", ask_qty=10)
        leg = convert_leg(D("0.002888028"), d, t, lowest_tier_fees, Role.MAKER)
        assert leg.gross == D("0.153")
        assert leg.net == D("0.15298164")
        assert leg.fee_amount == D("0.00001836")
        assert leg.residual == 0

    def test_zero_quantity_is_all_zero(self, ethbtc_universe, lowest_tier_fees):
        d = ethbtc_universe.direction("ETH", "BTC")
        leg = convert_leg(ZERO, d, top(bid="1"), lowest_tier_fees, Role.TAKER)
        assert (leg.gross, leg.fee_amount, leg.net, leg.residual) == (0, 0, 0, 0)

    def test_below_minimum_lot(self, lowest_tier_fees):
        uni = Universe([listing("ETHBTC", "ETH", "BTC", dx="0.001", min_qty="0.01")])
        d = uni.direction("ETH", "BTC")
        with pytest.raises(BelowMinimumError):
            convert_leg(D("0.0095"), d, top(bid="1"), lowest_tier_fees, Role.TAKER)

    def test_missing_liquidity(self, ethbtc_universe, lowest_tier_fees):
        d = ethbtc_universe.direction("BTC", "ETH")
        with pytest.raises(NoLiquidityError):
            convert_leg(D("1"), d, top(bid="1"), lowest_tier_fees, Role.TAKER)

    def test_pay_in_bnb_reports_fee_without_deduction(self, ethbtc_universe):
        fees = FeeModel(pay_in_bnb=True)
        rates = BnbRates.direct({"BTC": D("0.002"), "ETH": D("0.04")})
        d = ethbtc_universe.direction("ETH", "BTC")
        t = top(bid="0.018876", bid_qty=10, ask="0.018880", ask_qty=10)
        leg = convert_leg(D("0.153"), d, t, fees, Role.TAKER, rates)
        assert leg.net == leg.gross == D("0.002888028")
        assert leg.fee_amount == D("0.00000069312672")
        assert leg.fee_bnb == leg.fee_amount * D("0.002")


class TestBnbRate:
    def test_bnb_is_identity(self):
        assert bnb_rate("BNB", BnbRates()) == 1

    def test_reciprocal_when_bnb_is_base(self):
        rates = BnbRates({"XYZ": (D("2"), True)})
        assert bnb_rate("XYZ", rates) == D("0.5")

    def test_direct_when_coin_is_base(self):
        rates = BnbRates({"XYZ": (D("2"), False)})
        assert bnb_rate("XYZ", rates) == 2

    def test_unknown_coin(self):
        with pytest.raises(MissingRateError):
            bnb_rate("NOPE", BnbRates())
