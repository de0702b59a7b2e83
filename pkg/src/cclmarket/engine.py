"""Credit-filtered limit order book.

One global pool of resting limit orders, matched by price-time priority,
where every match between a taker ``i`` and a maker ``j`` is limited by the
remaining bilateral credit ``min(c(i,j), c(j,i)) - exposure{i,j}``. Each
institution therefore sees, and can hit, only the slice of the book its
credit relationships allow.

Prices live on an integer tick grid internally; the float price of ``t``
ticks is the correctly rounded value of the decimal ``t * tick_size``, the
same float that parsing the decimal string from a data file yields.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .analytics import TradeObservation, vwap
from .common import Side
from .config import ConfigError, parse_config_text, read_config
from .formats import RawTrade, TickEvent, write_observations, write_tick_file, write_trade_file

UNLIMITED = math.inf


class EngineError(Exception):
    pass


class InvalidPairError(EngineError, ValueError):
    pass


class OrderRejected(EngineError, ValueError):
    pass


class OrderNotFound(EngineError, LookupError):
    pass


class InvalidAmountError(EngineError, ValueError):
    pass


def parse_limit(value) -> float:
    """A credit limit from a number or the word ``unlimited``."""
    if isinstance(value, str):
        if value.strip().lower() in ("unlimited", "inf", "infinity"):
            return UNLIMITED
        value = float(value)
    v = float(value)
    if math.isnan(v) or v < 0:
        raise InvalidAmountError(f"credit limit must be >= 0 or unlimited, got {value!r}")
    return v


@dataclass(frozen=True)
class EngineConfig:
    tick_size: Decimal = Decimal("0.00001")
    min_order_size: float = 0.01
    default_ccl: float = UNLIMITED
    settlement: str = "manual"

    def __post_init__(self):
        tick = Decimal(str(self.tick_size))
        if tick <= 0:
            raise ConfigError("tick_size must be positive")
        object.__setattr__(self, "tick_size", tick)
        if not self.min_order_size > 0:
            raise ConfigError("min_order_size must be positive")
        object.__setattr__(self, "default_ccl", parse_limit(self.default_ccl))
        if self.settlement != "manual":
            raise ConfigError(f"unsupported settlement mode {self.settlement!r} (only 'manual')")

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "EngineConfig":
        known = {"tick_size", "min_order_size", "default_ccl", "settlement"}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown engine settings: {', '.join(sorted(unknown))}")
        kw = {}
        try:
            if "tick_size" in values:
                kw["tick_size"] = Decimal(values["tick_size"])
            if "min_order_size" in values:
                kw["min_order_size"] = float(values["min_order_size"])
        except (InvalidOperation, ValueError) as exc:
            raise ConfigError(f"bad engine setting: {exc}") from None
        if "default_ccl" in values:
            kw["default_ccl"] = values["default_ccl"]
        if "settlement" in values:
            kw["settlement"] = values["settlement"]
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        return cls.from_mapping(read_config(path))

    @classmethod
    def from_text(cls, text: str) -> "EngineConfig":
        return cls.from_mapping(parse_config_text(text))

    def to_ticks(self, price) -> int:
        """Exact tick count of ``price``; rejects prices off the grid."""
        try:
            d = Decimal(repr(price)) if isinstance(price, float) else Decimal(str(price))
        except InvalidOperation:
            raise OrderRejected(f"unparseable price {price!r}") from None
        q = d / self.tick_size
        if q != q.to_integral_value() or d <= 0:
            raise OrderRejected(f"price {price!r} is not a positive multiple of tick {self.tick_size}")
        return int(q)

    def price_of(self, ticks: int) -> float:
        return float(Decimal(ticks) * self.tick_size)

    def price_str(self, ticks: int) -> str:
        return str((Decimal(ticks) * self.tick_size).quantize(self.tick_size))


class CreditMatrix:
    """Directed limits ``c(i, j)``: the most ``i`` will be exposed to ``j``."""

    def __init__(self, default: float = UNLIMITED):
        self.default = parse_limit(default)
        self._limits: dict[tuple[int, int], float] = {}

    def set(self, i: int, j: int, limit) -> None:
        if i == j:
            raise InvalidPairError(f"cannot set a credit limit from institution {i} to itself")
        self._limits[(i, j)] = parse_limit(limit)

    def get(self, i: int, j: int) -> float:
        return self._limits.get((i, j), self.default)

    def bilateral(self, i: int, j: int) -> float:
        if i == j:
            raise InvalidPairError(f"no bilateral limit for institution {i} with itself")
        return min(self.get(i, j), self.get(j, i))


class ExposureLedger:
    """Gross unsettled notional per unordered pair."""

    def __init__(self):
        self._exp: dict[tuple[int, int], float] = {}

    @staticmethod
    def _key(i, j):
        return (i, j) if i < j else (j, i)

    def get(self, i: int, j: int) -> float:
        return self._exp.get(self._key(i, j), 0.0)

    def add(self, i: int, j: int, notional: float, cap: float) -> None:
        # Capacity-limited fills can overshoot the cap by rounding; clamp.
        k = self._key(i, j)
        self._exp[k] = min(self._exp.get(k, 0.0) + notional, cap)

    def release(self, i: int, j: int, amount: float) -> None:
        cur = self.get(i, j)
        if amount < 0 or amount > cur:
            raise InvalidAmountError(f"cannot release {amount!r} of exposure {cur!r} between {i} and {j}")
        self._exp[self._key(i, j)] = cur - amount

    def settle_all(self) -> None:
        self._exp.clear()

    def items(self):
        return sorted(self._exp.items())


@dataclass
class LimitOrder:
    order_id: int
    owner: int
    side: Side
    ticks: int
    price: float
    size: float  # remaining
    arrival_time: int

    @property
    def priority(self) -> tuple:
        return (self.arrival_time, self.order_id)


@dataclass(frozen=True)
class Fill:
    taker: int
    maker: int
    price: float
    ticks: int
    size: float
    time: int
    taker_side: Side
    global_best_at_match: float
    maker_order_id: int

    @property
    def skipping_cost(self) -> float:
        if self.taker_side is Side.BUY:
            return self.price - self.global_best_at_match
        return self.global_best_at_match - self.price


@dataclass(frozen=True)
class BookView:
    order_id: int
    owner: int
    side: Side
    price: float
    visible_size: float


@dataclass
class MatchResult:
    """Outcome of one taker order (market or the crossing part of a limit order)."""

    taker: int
    side: Side
    size: float
    time: int
    fills: list[Fill] = field(default_factory=list)
    residual: float = 0.0
    bid_before: float | None = None
    ask_before: float | None = None
    order_id: int | None = None  # set for limit orders
    resting: LimitOrder | None = None

    @property
    def filled(self) -> float:
        return math.fsum(f.size for f in self.fills)

    @property
    def vwap(self) -> float | None:
        if not self.fills:
            return None
        return vwap([f.price for f in self.fills], [f.size for f in self.fills])


class BookSide:
    def __init__(self, side: Side):
        self.side = side
        self.levels: dict[int, list[LimitOrder]] = {}
        self.prices: list[int] = []  # ascending

    def add(self, order: LimitOrder) -> None:
        level = self.levels.get(order.ticks)
        if level is None:
            level = self.levels[order.ticks] = []
            bisect.insort(self.prices, order.ticks)
        keys = [o.priority for o in level]
        level.insert(bisect.bisect(keys, order.priority), order)

    def remove(self, order: LimitOrder) -> None:
        level = self.levels[order.ticks]
        level.remove(order)
        if not level:
            del self.levels[order.ticks]
            self.prices.pop(bisect.bisect_left(self.prices, order.ticks))

    def best(self) -> int | None:
        if not self.prices:
            return None
        return self.prices[-1] if self.side is Side.BUY else self.prices[0]

    def in_priority(self) -> list[LimitOrder]:
        order = reversed(self.prices) if self.side is Side.BUY else self.prices
        return [o for t in order for o in self.levels[t]]


class EventLog:
    """Engine output in the tick-file/trade-file convention, plus ground truth.

    Resting orders are logged under their own log ids. A partially filled
    resting order is logged as a departure followed by the arrival of its
    remainder under a fresh id, since the tick format has no partial event.
    """

    def __init__(self, config: EngineConfig):
        self.config = config
        self.ticks: list[TickEvent] = []
        self.trades: list[RawTrade] = []
        self.observations: list[TradeObservation] = []
        self.dropped_one_sided = 0
        self.hidden_trades = 0
        self._log_id: dict[int, int] = {}
        self._next = 1

    def _arrive(self, order: LimitOrder, time: int) -> None:
        lid = self._next
        self._next += 1
        self._log_id[order.order_id] = lid
        self.ticks.append(TickEvent("arrival", time, lid, order.side, self.config.price_str(order.ticks), order.size))

    def _depart(self, order: LimitOrder, time: int) -> None:
        self.ticks.append(TickEvent("departure", time, self._log_id.pop(order.order_id)))

    def rest(self, order, time):
        self._arrive(order, time)

    def cancel(self, order, time):
        self._depart(order, time)

    def fill(self, fill: Fill, maker: LimitOrder) -> None:
        self._depart(maker, fill.time)
        if maker.size > 0:
            self._arrive(maker, fill.time)
        self.trades.append(RawTrade(fill.time, fill.taker_side, self.config.price_str(fill.ticks), fill.size))

    def taker_done(self, res: MatchResult) -> None:
        if not res.fills:
            return
        if res.bid_before is None or res.ask_before is None:
            self.dropped_one_sided += 1
            return
        b, a = res.bid_before, res.ask_before
        self.observations.append(
            TradeObservation(len(self.observations), res.time, res.side.direction, res.vwap, b, a, (b + a) / 2)
        )

    def hidden_trade(self, time: int, side: Side, ticks: int, size: float) -> None:
        self.hidden_trades += 1
        self.trades.append(RawTrade(time, side, self.config.price_str(ticks), size))

    def write(self, tick_path, trade_path, observation_path=None, provenance=None) -> None:
        write_tick_file(tick_path, self.ticks, provenance)
        write_trade_file(trade_path, self.trades, provenance)
        if observation_path is not None:
            write_observations(observation_path, self.observations, provenance)


class QclobEngine:
    def __init__(self, config: EngineConfig | None = None, *, log: bool = True):
        self.config = config or EngineConfig()
        self.credit = CreditMatrix(self.config.default_ccl)
        self.exposure = ExposureLedger()
        self.log = EventLog(self.config) if log else None
        self._sides = {Side.BUY: BookSide(Side.BUY), Side.SELL: BookSide(Side.SELL)}
        self._orders: dict[int, LimitOrder] = {}
        self._used_ids: set[int] = set()
        self._next_id = 1

    # -- credit ------------------------------------------------------------

    def set_ccl(self, i: int, j: int, limit) -> None:
        self.credit.set(i, j, limit)

    def bilateral_limit(self, i: int, j: int) -> float:
        return self.credit.bilateral(i, j)

    def capacity(self, i: int, j: int, price: float) -> float:
        """Base-currency amount ``i`` and ``j`` may still trade at ``price``."""
        room = self.credit.bilateral(i, j) - self.exposure.get(i, j)
        if room <= 0:
            return 0.0
        return room / price

    def release_exposure(self, i: int, j: int, amount: float) -> None:
        self.exposure.release(i, j, amount)

    def settle_all(self) -> None:
        self.exposure.settle_all()

    # -- book queries --------------------------------------------------------

    def best_ticks(self, side: Side) -> int | None:
        return self._sides[side].best()

    def best_bid(self) -> float | None:
        t = self._sides[Side.BUY].best()
        return None if t is None else self.config.price_of(t)

    def best_ask(self) -> float | None:
        t = self._sides[Side.SELL].best()
        return None if t is None else self.config.price_of(t)

    def resting_orders(self, side: Side | None = None) -> list[LimitOrder]:
        sides = [side] if side is not None else [Side.BUY, Side.SELL]
        return [o for s in sides for o in self._sides[s].in_priority()]

    def get_order(self, order_id: int) -> LimitOrder:
        try:
            return self._orders[order_id]
        except KeyError:
            raise OrderNotFound(f"no resting order {order_id}") from None

    def filtered_book(self, i: int) -> list[BookView]:
        """The book as institution ``i`` may trade it: others' sizes cut to credit capacity."""
        out = []
        for o in self.resting_orders():
            visible = o.size if o.owner == i else min(o.size, self.capacity(i, o.owner, o.price))
            if visible > 0:
                out.append(BookView(o.order_id, o.owner, o.side, o.price, visible))
        return out

    # -- order flow ------------------------------------------------------------

    def _check_size(self, size: float) -> float:
        size = float(size)
        if not size >= self.config.min_order_size:
            raise OrderRejected(f"size {size!r} below minimum {self.config.min_order_size}")
        return size

    def _match(self, taker: int, side: Side, size: float, time: int, limit_ticks: int | None) -> MatchResult:
        res = MatchResult(taker, side, size, time, residual=size, bid_before=self.best_bid(), ask_before=self.best_ask())
        book = self._sides[side.opposite]
        best = book.best()
        if best is None:
            return res
        best_price = self.config.price_of(best)
        remaining = size
        for maker in book.in_priority():
            if limit_ticks is not None and (
                maker.ticks > limit_ticks if side is Side.BUY else maker.ticks < limit_ticks
            ):
                break
            if maker.owner == taker:
                continue
            qty = min(remaining, maker.size, self.capacity(taker, maker.owner, maker.price))
            if qty <= 0:
                continue
            fill = Fill(taker, maker.owner, maker.price, maker.ticks, qty, time, side, best_price, maker.order_id)
            res.fills.append(fill)
            self.exposure.add(taker, maker.owner, maker.price * qty, self.credit.bilateral(taker, maker.owner))
            maker.size -= qty
            if maker.size <= 0:
                maker.size = 0.0
                book.remove(maker)
                del self._orders[maker.order_id]
            if self.log is not None:
                self.log.fill(fill, maker)
            remaining -= qty
            if remaining <= 0:
                remaining = 0.0
                break
        res.residual = remaining
        return res

    def submit_market_order(self, taker: int, side, size: float, time: int = 0) -> MatchResult:
        """Immediate-or-cancel: fill what credit allows, cancel the rest."""
        side = Side.parse(side) if isinstance(side, str) else side
        size = self._check_size(size)
        res = self._match(taker, side, size, time, None)
        if self.log is not None:
            self.log.taker_done(res)
        return res

    def submit_limit_order(self, owner: int, side, price, size: float, time: int = 0,
                           order_id: int | None = None) -> MatchResult:
        """Match the crossing part like a market order; rest the remainder."""
        side = Side.parse(side) if isinstance(side, str) else side
        ticks = self.config.to_ticks(price)
        size = self._check_size(size)
        if order_id is None:
            while self._next_id in self._used_ids:
                self._next_id += 1
            order_id = self._next_id
        elif order_id in self._used_ids:
            raise OrderRejected(f"order id {order_id} already used")
        self._used_ids.add(order_id)
        res = self._match(owner, side, size, time, ticks)
        res.order_id = order_id
        if self.log is not None:
            self.log.taker_done(res)
        if res.residual > 0:
            order = LimitOrder(order_id, owner, side, ticks, self.config.price_of(ticks), res.residual, time)
            self._sides[side].add(order)
            self._orders[order_id] = order
            res.resting = order
            if self.log is not None:
                self.log.rest(order, time)
        return res

    def cancel_order(self, order_id: int, time: int = 0) -> LimitOrder:
        order = self.get_order(order_id)
        self._sides[order.side].remove(order)
        del self._orders[order_id]
        if self.log is not None:
            self.log.cancel(order, time)
        return order

    def hidden_trade(self, side, price, size: float, time: int = 0) -> None:
        """Record a trade row with no matching book departure (an off-book execution)."""
        side = Side.parse(side) if isinstance(side, str) else side
        if self.log is not None:
            self.log.hidden_trade(time, side, self.config.to_ticks(price), float(size))


def write_engine_day(engine: QclobEngine, out_dir, stem: str = "day", provenance=None) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "ticks": out / f"{stem}_ticks.csv",
        "trades": out / f"{stem}_trades.csv",
        "truth": out / f"{stem}_truth.csv",
    }
    engine.log.write(paths["ticks"], paths["trades"], paths["truth"], provenance)
    return paths
