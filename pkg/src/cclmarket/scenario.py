"""Scripted order flow for the engine, and a random generator of such scripts.

A scenario file is JSON::

    {
      "engine": {"tick_size": "0.00001", "default_ccl": "unlimited"},
      "ccl": [[0, 1, 0], [1, 0, "unlimited"]],
      "actions": [
        {"time_ms": 28800000, "op": "limit", "owner": 1, "side": "sell", "price": "1.00000", "size": 1e6},
        {"time_ms": 28800005, "op": "market", "taker": 0, "side": "buy", "size": 1e6},
        {"time_ms": 28800010, "op": "cancel", "order_id": 1},
        {"time_ms": 28800020, "op": "set_ccl", "i": 0, "j": 1, "limit": 5e6},
        {"time_ms": 28800030, "op": "release", "i": 0, "j": 1, "amount": 1e5},
        {"time_ms": 28800040, "op": "hidden", "side": "buy", "price": "1.00001", "size": 1e5}
      ]
    }

``limit`` actions may carry an explicit ``order_id``; otherwise the engine
numbers orders 1, 2, ... in submission order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .common import Side
from .engine import UNLIMITED, EngineConfig, EngineError, QclobEngine

SESSION_START_MS = 8 * 3_600_000
SESSION_END_MS = 17 * 3_600_000


class ScenarioError(ValueError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"action {step}: {message}")
        self.step = step


@dataclass
class Scenario:
    engine: dict = field(default_factory=dict)
    ccl: list = field(default_factory=list)
    actions: list = field(default_factory=list)

    def to_json(self) -> str:
        def enc(v):
            return "unlimited" if v == UNLIMITED else v

        return json.dumps(
            {"engine": self.engine, "ccl": [[i, j, enc(c)] for i, j, c in self.ccl], "actions": self.actions},
            indent=1,
        )


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    return Scenario(data.get("engine", {}), data.get("ccl", []), data.get("actions", []))


def run_scenario(sc: Scenario) -> QclobEngine:
    try:
        cfg = EngineConfig.from_mapping({k: str(v) for k, v in sc.engine.items()})
        eng = QclobEngine(cfg)
        for i, j, limit in sc.ccl:
            eng.set_ccl(int(i), int(j), limit)
    except (EngineError, ValueError) as exc:
        raise ScenarioError(f"bad engine setup: {exc}") from None
    last = None
    for step, act in enumerate(sc.actions):
        try:
            t = int(act["time_ms"])
            if last is not None and t < last:
                raise ScenarioError(f"time_ms {t} goes backwards", step)
            last = t
            op = act["op"]
            if op == "limit":
                eng.submit_limit_order(int(act["owner"]), act["side"], act["price"], float(act["size"]), t,
                                       act.get("order_id"))
            elif op == "market":
                eng.submit_market_order(int(act["taker"]), act["side"], float(act["size"]), t)
            elif op == "cancel":
                eng.cancel_order(int(act["order_id"]), t)
            elif op == "set_ccl":
                eng.set_ccl(int(act["i"]), int(act["j"]), act["limit"])
            elif op == "release":
                eng.release_exposure(int(act["i"]), int(act["j"]), float(act["amount"]))
            elif op == "settle":
                eng.settle_all()
            elif op == "hidden":
                eng.hidden_trade(act["side"], act["price"], float(act["size"]), t)
            else:
                raise ScenarioError(f"unknown op {op!r}", step)
        except ScenarioError:
            raise
        except KeyError as exc:
            raise ScenarioError(f"missing field {exc}", step) from None
        except (EngineError, ValueError, TypeError) as exc:
            raise ScenarioError(str(exc), step) from None
    return eng


_LIMIT_CHOICES = (0.0, 1e6, 3e6, 1e7, UNLIMITED)


def _price(ticks: int) -> str:
    return f"{ticks // 100_000}.{ticks % 100_000:05d}"


def random_scenario(rng: np.random.Generator, *, n_institutions: int = 6, n_actions: int = 300,
                    unlimited: bool = False, hidden_rate: float = 0.05) -> Scenario:
    """A random trading day that survives a write/re-ingest round trip unchanged.

    Every action gets its own millisecond and consecutive actions are at
    least 2 ms apart, so fills from different taker orders never merge
    under 1 ms aggregation and "immediately before" is unambiguous. Limit
    orders use even tick counts; hidden trades use odd ones, so a hidden
    trade can never be associated with a real departure. A probe engine
    runs alongside so cancels only target orders still resting.
    """
    ccl = []
    if not unlimited:
        for i in range(n_institutions):
            for j in range(n_institutions):
                if i != j:
                    ccl.append([i, j, float(rng.choice(_LIMIT_CHOICES))])
    sc = Scenario({}, ccl, [])
    probe = QclobEngine(EngineConfig(), log=False)
    for i, j, c in ccl:
        probe.set_ccl(i, j, c)
    t = SESSION_START_MS + int(rng.integers(0, 3_600_000))
    next_id = 1
    mid = 100_000  # ticks
    for _ in range(n_actions):
        t += int(rng.integers(2, 2_000))
        u = rng.random()
        side = "buy" if rng.random() < 0.5 else "sell"
        resting = probe.resting_orders()
        if u < 0.45:
            offset = 2 * int(rng.integers(-3, 15))  # even ticks, sometimes crossing
            ticks = mid - offset if side == "buy" else mid + offset
            act = {"time_ms": t, "op": "limit", "owner": int(rng.integers(n_institutions)), "side": side,
                   "price": _price(ticks), "size": float(rng.choice([0.5e6, 1e6, 2e6, 3e6])), "order_id": next_id}
            next_id += 1
        elif u < 0.75:
            act = {"time_ms": t, "op": "market", "taker": int(rng.integers(n_institutions)), "side": side,
                   "size": float(rng.choice([0.5e6, 1e6, 2.5e6, 5e6]))}
        elif u < 0.75 + hidden_rate:
            ticks = mid + 2 * int(rng.integers(-10, 10)) + 1
            act = {"time_ms": t, "op": "hidden", "side": side, "price": _price(ticks),
                   "size": float(rng.choice([1e5, 1e6]))}
        elif u < 0.95 and resting:
            act = {"time_ms": t, "op": "cancel", "order_id": resting[int(rng.integers(len(resting)))].order_id}
        elif not unlimited and u < 0.98:
            i, j = (int(x) for x in rng.choice(n_institutions, 2, replace=False))
            act = {"time_ms": t, "op": "set_ccl", "i": i, "j": j, "limit": float(rng.choice(_LIMIT_CHOICES))}
        else:
            act = {"time_ms": t, "op": "settle"}
        sc.actions.append(act)
        _apply(probe, act)
    return sc


def _apply(eng: QclobEngine, act: dict) -> None:
    op = act["op"]
    t = act["time_ms"]
    if op == "limit":
        eng.submit_limit_order(act["owner"], act["side"], act["price"], act["size"], t, act.get("order_id"))
    elif op == "market":
        eng.submit_market_order(act["taker"], act["side"], act["size"], t)
    elif op == "cancel":
        eng.cancel_order(act["order_id"], t)
    elif op == "set_ccl":
        eng.set_ccl(act["i"], act["j"], act["limit"])
    elif op == "settle":
        eng.settle_all()
