"""Independent oracles the implementation is checked against.

These deliberately avoid the code paths they verify: capacity is found by
binary search over a leg-by-leg feasibility simulation, gain is found by
replaying single conversions one leg at a time, and subset sums come from
exhaustive enumeration.
"""

from decimal import Decimal
from itertools import combinations

from arblens import BookSet, Cycle, FeeModel
from arblens.market import BnbRates, Role
from arblens.numeric import D, ZERO, div
from arblens.ops import convert_leg, exchange_ratio, pair_capacity


def capacity_by_binary_search(
    cycle: Cycle, books: BookSet, increment: Decimal = D("1E-8")
) -> Decimal:
    """Largest increment multiple feasible through every leg's capacity."""

    def feasible(q: Decimal) -> bool:
        x = q
        for direction in cycle.directions:
            top = books.top(direction.listing.symbol)
            if x > pair_capacity(direction, top):
                return False
            x *= exchange_ratio(direction, top)
        return True

    hi = 1
    while feasible(increment * hi):
        hi *= 2
        if hi > 10**18:
            raise AssertionError("oracle search bound exceeded")
    lo = 0  # in increments; invariant: lo feasible, hi infeasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(increment * mid):
            lo = mid
        else:
            hi = mid
    return increment * lo


def gain_by_leg_replay(
    Q: Decimal,
    cycle: Cycle,
    books: BookSet,
    rates: BnbRates,
    fee: FeeModel,
) -> Decimal:
    """Gain from replaying convert_leg leg by leg, fees settled in BNB.

    The taker rate is pinned to the flat BNB rate so each leg's fee equals
    flat * proceeds, then everything is valued back in base-coin terms.
    """
    flat_as_bps = fee.bnb_flat / D("1E-4")
    leg_fee = FeeModel(
        maker_bps=flat_as_bps,
        taker_bps=flat_as_bps,
        bnb_flat=fee.bnb_flat,
        pay_in_bnb=True,
    )
    base = cycle.base_coin.symbol
    wallet = Q
    committed = None
    residual_value = ZERO
    fees_bnb = ZERO
    for i, direction in enumerate(cycle.directions):
        top = books.top(direction.listing.symbol)
        if wallet == 0:
            return ZERO
        leg = convert_leg(wallet, direction, top, leg_fee, Role.TAKER, rates)
        if i == 0:
            committed = wallet - leg.residual
        else:
            residual_value += leg.residual * books.ratio(direction.frm.symbol, base)
        fees_bnb += leg.fee_bnb
        wallet = leg.net
    return wallet - committed + residual_value - fees_bnb * books.ratio("BNB", base)


def subset_sums_exist(
    quantities: list[Decimal], target: Decimal, tol_minus: Decimal, tol_plus: Decimal
) -> bool:
    """Exhaustively check whether any nonempty subset S satisfies
    -tol_minus <= target - sum(S) <= tol_plus."""
    for r in range(1, len(quantities) + 1):
        for combo in combinations(quantities, r):
            diff = target - sum(combo)
            if -tol_minus <= diff <= tol_plus:
                return True
    return False
