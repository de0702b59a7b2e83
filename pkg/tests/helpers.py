"""Random engine instances and their comparison against the brute-force oracle."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from cclmarket.common import Side
from cclmarket.engine import UNLIMITED, EngineConfig, QclobEngine

from oracles import brute_force_fills

TICK = Fraction(1, 100_000)
LIMITS = (0.0, 2.5e5, 1e6, 3e6, 1e7, UNLIMITED)


def price_text(ticks: int) -> str:
    return f"{ticks // 100_000}.{ticks % 100_000:05d}"


def random_engine(rng: np.random.Generator, n_inst: int, n_orders: int, *, unlimited=False) -> QclobEngine:
    eng = QclobEngine(EngineConfig(), log=False)
    if not unlimited:
        for i in range(n_inst):
            for j in range(n_inst):
                if i != j and rng.random() < 0.8:
                    eng.set_ccl(i, j, float(rng.choice(LIMITS)))
    t = 0
    for _ in range(n_orders):
        t += int(rng.integers(0, 3))  # equal times exercise the order-id tiebreak
        side = "buy" if rng.random() < 0.5 else "sell"
        ticks = 100_000 + (int(rng.integers(-12, 2)) if side == "buy" else int(rng.integers(-1, 13)))
        eng.submit_limit_order(int(rng.integers(n_inst)), side, price_text(ticks),
                               float(rng.choice([1e5, 5e5, 1e6, 2e6])), t)
    return eng


def oracle_inputs(eng: QclobEngine, n_inst: int):
    orders = [
        {"order_id": o.order_id, "owner": o.owner, "side": o.side.value, "price": o.ticks * TICK,
         "size": o.size, "arrival": o.arrival_time}
        for o in eng.resting_orders()
    ]
    credit = {(i, j): eng.credit.get(i, j) for i in range(n_inst) for j in range(n_inst) if i != j}
    exposure = {frozenset(k): v for k, v in eng.exposure.items()}
    return orders, credit, exposure


def compare_market_order(eng: QclobEngine, n_inst: int, taker: int, side: str, size: float, t: int) -> list[str]:
    """Submit one market order to the engine and the oracle; return mismatch descriptions."""
    orders, credit, exposure = oracle_inputs(eng, n_inst)
    expected = brute_force_fills(orders, credit, exposure, taker, side, size)
    res = eng.submit_market_order(taker, side, size, t)
    got = [(f.maker_order_id, f.ticks * TICK, f.size) for f in res.fills]
    problems = []
    if got != expected:
        problems.append(f"fills differ: engine {got} oracle {expected}")
    if res.fills:
        opp = Side.SELL if side == "buy" else Side.BUY
        best = min if side == "buy" else max
        gb = best(o["price"] for o in orders if o["side"] == opp.value)
        if any(f.global_best_at_match != float(gb) for f in res.fills):
            problems.append("global best mismatch")
    return problems
