"""Tick-file and trade-file ingestion into trade observations.

Pipeline for one trading day:

1. parse both files and check referential integrity;
2. replay arrivals and departures to know the best bid and ask at any time;
3. associate each trade with the same-price departure closest in time,
   dropping trades with no such departure (hidden orders);
4. merge consecutive same-direction trades at most 1 ms apart into market orders
   priced at their VWAP;
5. attach the quotes in force immediately before each market order.

Times are integer milliseconds since midnight GMT; the default session is
08:00:00 to 17:00:00.
"""
from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Sequence

from .analytics import DataIntegrityError, TradeObservation, vwap
from .common import Direction, Side
from .engine import BookSide, LimitOrder
from .formats import FormatError, RawTrade, TickEvent, read_tick_rows, read_trade_rows

DEFAULT_WINDOW_MS = 1000
AGGREGATION_MS = 1
GAP_LIMIT_MS = 30_000
DEFAULT_SESSION = (8 * 3_600_000, 17 * 3_600_000)


class IntegrityError(ValueError):
    pass


def parse_tick_file(path) -> list[TickEvent]:
    """Parse and validate a tick file; departures must name an earlier live arrival."""
    events = read_tick_rows(path)
    live: set[int] = set()
    seen: set[int] = set()
    for ev in events:
        if ev.kind == "arrival":
            if ev.order_id in seen:
                raise IntegrityError(f"{path}: order id {ev.order_id} arrives twice")
            seen.add(ev.order_id)
            live.add(ev.order_id)
        else:
            if ev.order_id not in live:
                raise IntegrityError(f"{path}: departure of unknown order id {ev.order_id}")
            live.discard(ev.order_id)
    return events


def parse_trade_file(path) -> list[RawTrade]:
    return read_trade_rows(path)


def _key(price: str) -> Decimal:
    # Equal prices compare equal however many trailing zeros they carry.
    return Decimal(price).normalize()


class BookTimeline:
    """Best quotes after each distinct event time, queryable "just before t"."""

    def __init__(self, times: list[int], bids: list[str | None], asks: list[str | None], crossed: int):
        self.times = times
        self._bids = bids
        self._asks = asks
        self.crossed_states = crossed

    def _at(self, t: int) -> int:
        return bisect.bisect_left(self.times, t) - 1

    def bid_before(self, t: int) -> float | None:
        i = self._at(t)
        return None if i < 0 or self._bids[i] is None else float(self._bids[i])

    def ask_before(self, t: int) -> float | None:
        i = self._at(t)
        return None if i < 0 or self._asks[i] is None else float(self._asks[i])

    def mid_before(self, t: int) -> float | None:
        b, a = self.bid_before(t), self.ask_before(t)
        return None if b is None or a is None else (b + a) / 2

    def bid(self, t: int) -> float | None:
        """Best bid after every event at or before ``t``."""
        return self.bid_before(t + 1)

    def ask(self, t: int) -> float | None:
        return self.ask_before(t + 1)


def reconstruct_book(events: Sequence[TickEvent]) -> BookTimeline:
    """Replay arrivals and departures; crossed states are counted, not rejected."""
    sides = {Side.BUY: BookSide(Side.BUY), Side.SELL: BookSide(Side.SELL)}
    orders: dict[int, LimitOrder] = {}
    text: dict[int, str] = {}  # scaled-int key -> original price string
    times, bids, asks = [], [], []
    crossed = 0
    scale = 10**8

    def snapshot(t):
        nonlocal crossed
        b = sides[Side.BUY].best()
        a = sides[Side.SELL].best()
        if b is not None and a is not None and b >= a:
            crossed += 1
        times.append(t)
        bids.append(None if b is None else text[b])
        asks.append(None if a is None else text[a])

    for n, ev in enumerate(events):
        if ev.kind == "arrival":
            d = _key(ev.price)
            ticks = int(d * scale)
            if Decimal(ticks) / scale != d:
                raise FormatError(f"price {ev.price} has more than 8 decimal places")
            text.setdefault(ticks, ev.price)
            o = LimitOrder(ev.order_id, -1, ev.side, ticks, float(ev.price), ev.size, ev.time_ms)
            sides[ev.side].add(o)
            orders[ev.order_id] = o
        else:
            o = orders.pop(ev.order_id, None)
            if o is None:
                raise IntegrityError(f"departure of unknown order id {ev.order_id}")
            sides[o.side].remove(o)
        if n + 1 == len(events) or events[n + 1].time_ms != ev.time_ms:
            snapshot(ev.time_ms)
    return BookTimeline(times, bids, asks, crossed)


@dataclass
class Association:
    associated: list[tuple[RawTrade, TickEvent]] = field(default_factory=list)
    hidden: list[RawTrade] = field(default_factory=list)
    ambiguous: list[RawTrade] = field(default_factory=list)  # flagged; kept unless excluded
    excluded_ambiguous: int = 0

    @property
    def kept(self) -> list[RawTrade]:
        return [t for t, _ in self.associated]


def associate_trades(trades: Sequence[RawTrade], events: Sequence[TickEvent], window_ms: int = DEFAULT_WINDOW_MS,
                     *, exclude_ambiguous: bool = False) -> Association:
    """Match each trade to the unconsumed same-price departure nearest in time.

    Ties in ``|dt|`` go to the earlier departure and flag the trade as
    ambiguous. Trades without a candidate within ``window_ms`` are hidden.
    """
    price_of: dict[int, str] = {}
    by_price: dict[Decimal, list[tuple[int, int, TickEvent]]] = defaultdict(list)
    for seq, ev in enumerate(events):
        if ev.kind == "arrival":
            price_of[ev.order_id] = ev.price
        else:
            by_price[_key(price_of[ev.order_id])].append((ev.time_ms, seq, ev))
    consumed: set[int] = set()
    out = Association()
    for tr in trades:
        deps = by_price.get(_key(tr.price), [])
        lo = bisect.bisect_left(deps, (tr.time_ms - window_ms, -1))
        hi = bisect.bisect_right(deps, (tr.time_ms + window_ms, len(events)))
        best = None
        ties = 0
        for t, seq, ev in deps[lo:hi]:
            if seq in consumed:
                continue
            key = (abs(t - tr.time_ms), t, seq)
            if best is None or key[0] < best[0][0]:
                best, ties = (key, ev), 1
            elif key[0] == best[0][0]:
                ties += 1
        if best is None:
            out.hidden.append(tr)
            continue
        if ties > 1:
            out.ambiguous.append(tr)
            if exclude_ambiguous:
                out.excluded_ambiguous += 1
                continue
        consumed.add(best[0][2])
        out.associated.append((tr, best[1]))
    return out


@dataclass(frozen=True)
class MarketOrderGroup:
    trades: tuple[RawTrade, ...]
    size: float
    vwap: float
    time_ms: int
    direction: Direction


def aggregate_market_orders(trades: Sequence[RawTrade], threshold_ms: int = AGGREGATION_MS) -> list[MarketOrderGroup]:
    """Greedy grouping of consecutive same-direction trades no more than ``threshold_ms`` apart."""
    groups: list[list[RawTrade]] = []
    for tr in trades:
        cur = groups[-1] if groups else None
        if cur and cur[-1].side is tr.side and tr.time_ms - cur[-1].time_ms <= threshold_ms:
            cur.append(tr)
        else:
            groups.append([tr])
    out = []
    for g in groups:
        sizes = [t.size for t in g]
        out.append(MarketOrderGroup(tuple(g), sum(sizes), vwap([t.price_value for t in g], sizes),
                                    g[0].time_ms, g[0].side.direction))
    return out


@dataclass
class IngestReport:
    n_tick_events: int = 0
    n_trades: int = 0
    hidden: int = 0
    ambiguous: int = 0
    excluded_ambiguous: int = 0
    groups: int = 0
    outside_session: int = 0
    one_sided: int = 0
    quarantined: int = 0
    crossed_states: int = 0
    gaps: list[tuple[int, int]] = field(default_factory=list)

    @property
    def session_valid(self) -> bool:
        return not self.gaps


def build_observations(groups: Sequence[MarketOrderGroup], book: BookTimeline,
                       session: tuple[int, int] = DEFAULT_SESSION,
                       report: IngestReport | None = None) -> list[TradeObservation]:
    report = report if report is not None else IngestReport()
    out = []
    for g in groups:
        if not session[0] <= g.time_ms < session[1]:
            report.outside_session += 1
            continue
        b, a = book.bid_before(g.time_ms), book.ask_before(g.time_ms)
        if b is None or a is None:
            report.one_sided += 1
            continue
        if (g.direction is Direction.BUYER_INITIATED and g.vwap < a) or (
            g.direction is Direction.SELLER_INITIATED and g.vwap > b
        ):
            report.quarantined += 1
            continue
        out.append(TradeObservation(len(out), g.time_ms, g.direction, g.vwap, b, a, (b + a) / 2))
    return out


def find_gaps(times: Sequence[int], session: tuple[int, int] = DEFAULT_SESSION,
              limit_ms: int = GAP_LIMIT_MS) -> list[tuple[int, int]]:
    inside = sorted(t for t in times if session[0] <= t < session[1])
    return [(a, b) for a, b in zip(inside, inside[1:]) if b - a >= limit_ms]


def ingest_day(tick_path, trade_path, *, window_ms: int = DEFAULT_WINDOW_MS,
               session: tuple[int, int] = DEFAULT_SESSION,
               exclude_ambiguous: bool = False) -> tuple[list[TradeObservation], IngestReport]:
    events = parse_tick_file(tick_path)
    trades = parse_trade_file(trade_path)
    report = IngestReport(n_tick_events=len(events), n_trades=len(trades))
    book = reconstruct_book(events)
    report.crossed_states = book.crossed_states
    assoc = associate_trades(trades, events, window_ms, exclude_ambiguous=exclude_ambiguous)
    report.hidden = len(assoc.hidden)
    report.ambiguous = len(assoc.ambiguous)
    report.excluded_ambiguous = assoc.excluded_ambiguous
    groups = aggregate_market_orders(assoc.kept)
    report.groups = len(groups)
    obs = build_observations(groups, book, session, report)
    report.gaps = find_gaps([e.time_ms for e in events] + [t.time_ms for t in trades], session)
    return obs, report


__all__ = [
    "IntegrityError", "DataIntegrityError", "FormatError", "parse_tick_file", "parse_trade_file",
    "BookTimeline", "reconstruct_book", "Association", "associate_trades", "MarketOrderGroup",
    "aggregate_market_orders", "IngestReport", "build_observations", "find_gaps", "ingest_day",
]
