from .engine import MatchingEngine, Order, OrderType, Side, SimTrade, SnapshotRow
from .scenario import (
    GroundTruthLabel,
    ScenarioOutput,
    ScenarioSpec,
    run_scenario,
    write_labels,
    write_snapshots,
    write_trades_csv,
)

__all__ = [
    "GroundTruthLabel",
    "MatchingEngine",
    "Order",
    "OrderType",
    "ScenarioOutput",
    "ScenarioSpec",
    "Side",
    "SimTrade",
    "SnapshotRow",
    "run_scenario",
    "write_labels",
    "write_snapshots",
    "write_trades_csv",
]
