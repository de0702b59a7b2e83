from ..common import Direction
from .io import direction_arrays, observations, write_run
from .model import (
    MarketState,
    ModelParams,
    SimOutput,
    SimTrade,
    SimulationError,
    classify_trade,
    detect_crossings,
    init_state,
    make_rng,
    process_trade,
    resolve_multiple,
    run,
    run_reference,
    step,
)

__all__ = [
    "Direction",
    "MarketState",
    "ModelParams",
    "SimOutput",
    "SimTrade",
    "SimulationError",
    "classify_trade",
    "direction_arrays",
    "detect_crossings",
    "init_state",
    "make_rng",
    "observations",
    "process_trade",
    "resolve_multiple",
    "run",
    "run_reference",
    "step",
    "write_run",
]
