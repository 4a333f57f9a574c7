"""arblens: exact-decimal microstructure math, trade-sequence detectors,
and a deterministic matching-engine simulator for exchange trade logs."""

__version__ = "0.1.0"

from .errors import ArbLensError
from .market import (
    AnchorClass,
    BnbRates,
    BookLevels,
    BookTop,
    Coin,
    Direction,
    FeeModel,
    Orientation,
    PairListing,
    Role,
    Universe,
    load_listings,
)
from .numeric import D, q8, round_down
from .ops import (
    bid_ask_spread,
    bnb_rate,
    convert_leg,
    exchange_ratio,
    pair_capacity,
    residual,
    trade_quantity,
)
from .cycles import (
    BookSet,
    ConversionPath,
    Cycle,
    CycleClass,
    GainBreakdown,
    Verdict,
    compare_conversions,
    conversion_proceeds,
    cycle_balances,
    cycle_capacity,
    cycle_gain,
    enumerate_cycles,
)

__all__ = [
    "ArbLensError",
    "AnchorClass",
    "BnbRates",
    "BookLevels",
    "BookSet",
    "BookTop",
    "Coin",
    "ConversionPath",
    "Cycle",
    "CycleClass",
    "D",
    "Direction",
    "FeeModel",
    "GainBreakdown",
    "Orientation",
    "PairListing",
    "Role",
    "Universe",
    "Verdict",
    "bid_ask_spread",
    "bnb_rate",
    "compare_conversions",
    "conversion_proceeds",
    "convert_leg",
    "cycle_balances",
    "cycle_capacity",
    "cycle_gain",
    "enumerate_cycles",
    "exchange_ratio",
    "load_listings",
    "pair_capacity",
    "q8",
    "residual",
    "round_down",
    "trade_quantity",
]
