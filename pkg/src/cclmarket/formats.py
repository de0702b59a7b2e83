"""CSV formats shared by the engine, the ingest pipeline and the CLI.

Every writer can prefix its file with ``# key: value`` provenance lines.
Readers skip lines starting with ``#``. The ``# generated:`` line carries a
wall-clock timestamp and is the only line allowed to differ between two
otherwise identical runs.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .common import Direction, Side

TICK_HEADER = ("kind", "time_ms", "order_id", "side", "price", "size")
TRADE_HEADER = ("time_ms", "side", "price", "size")
OBSERVATION_HEADER = ("k", "time_ms", "direction", "p", "b", "a", "m", "r", "r_norm_bp")
TIMESTAMP_KEY = "generated"


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""


def fmt_float(x: float) -> str:
    """Shortest string that parses back to the same float."""
    return repr(float(x))


def params_hash(params: Mapping) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance_lines(params: Mapping, *, timestamp: bool = True) -> list[str]:
    lines = []
    if timestamp:
        now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        lines.append(f"# {TIMESTAMP_KEY}: {now}")
    lines.append(f"# spec_hash: {params_hash(params)}")
    for key in sorted(params):
        lines.append(f"# {key}: {json.dumps(params[key], sort_keys=True, default=str)}")
    return lines


def strip_timestamp(text: str) -> str:
    """Drop the timestamp header line, for byte comparisons between runs."""
    return "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith(f"# {TIMESTAMP_KEY}:"))


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], provenance: Mapping | None = None) -> None:
    buf = io.StringIO()
    if provenance is not None:
        for line in provenance_lines(provenance):
            buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def read_csv(path: str | Path, header: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    """Rows as ``(line_number, record)``; the header must match exactly."""
    p = Path(path)
    try:
        lines = p.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"{p}: {exc}") from None
    numbered = [(n, ln) for n, ln in enumerate(lines, start=1) if ln.strip() and not ln.startswith("#")]
    if not numbered:
        return []
    first_no, first = numbered[0]
    got = next(csv.reader([first]))
    if tuple(h.strip() for h in got) != tuple(header):
        raise FormatError(f"{p}:{first_no}: expected header {','.join(header)!r}, got {first!r}")
    out = []
    for n, ln in numbered[1:]:
        vals = next(csv.reader([ln]))
        if len(vals) != len(header):
            raise FormatError(f"{p}:{n}: expected {len(header)} fields, got {len(vals)}")
        out.append((n, dict(zip(header, (v.strip() for v in vals)))))
    return out


# ---------------------------------------------------------------------------
# Tick and trade files


@dataclass(frozen=True)
class TickEvent:
    kind: str  # "arrival" or "departure"
    time_ms: int
    order_id: int
    side: Side | None = None
    price: str | None = None  # decimal string on the tick grid
    size: float | None = None

    @property
    def price_value(self) -> float:
        return float(self.price)


@dataclass(frozen=True)
class RawTrade:
    time_ms: int
    side: Side
    price: str
    size: float

    @property
    def price_value(self) -> float:
        return float(self.price)

    @property
    def direction(self) -> Direction:
        return self.side.direction


def tick_row(ev: TickEvent) -> tuple:
    if ev.kind == "arrival":
        return ("arrival", ev.time_ms, ev.order_id, ev.side.value, ev.price, fmt_float(ev.size))
    return ("departure", ev.time_ms, ev.order_id, "", "", "")


def trade_row(tr: RawTrade) -> tuple:
    return (tr.time_ms, tr.side.value, tr.price, fmt_float(tr.size))


def write_tick_file(path, events: Iterable[TickEvent], provenance: Mapping | None = None) -> None:
    write_csv(path, TICK_HEADER, (tick_row(e) for e in events), provenance)


def write_trade_file(path, trades: Iterable[RawTrade], provenance: Mapping | None = None) -> None:
    write_csv(path, TRADE_HEADER, (trade_row(t) for t in trades), provenance)


def _int(p, n, field, raw):
    try:
        return int(raw)
    except ValueError:
        raise FormatError(f"{p}:{n}: {field} must be an integer, got {raw!r}") from None


def _pos_float(p, n, field, raw):
    try:
        v = float(raw)
    except ValueError:
        raise FormatError(f"{p}:{n}: {field} must be a number, got {raw!r}") from None
    if not v > 0:
        raise FormatError(f"{p}:{n}: {field} must be positive, got {raw!r}")
    return v


def _side(p, n, raw):
    try:
        return Side.parse(raw)
    except ValueError:
        raise FormatError(f"{p}:{n}: side must be buy or sell, got {raw!r}") from None


def _time(p, n, raw, prev):
    t = _int(p, n, "time_ms", raw)
    if prev is not None and t < prev:
        raise FormatError(f"{p}:{n}: time_ms {t} goes backwards (previous {prev})")
    return t


def read_tick_rows(path) -> list[TickEvent]:
    out = []
    prev = None
    for n, rec in read_csv(path, TICK_HEADER):
        t = prev = _time(path, n, rec["time_ms"], prev)
        oid = _int(path, n, "order_id", rec["order_id"])
        kind = rec["kind"]
        if kind == "arrival":
            side = _side(path, n, rec["side"])
            _pos_float(path, n, "price", rec["price"])
            size = _pos_float(path, n, "size", rec["size"])
            out.append(TickEvent("arrival", t, oid, side, rec["price"], size))
        elif kind == "departure":
            if rec["side"] or rec["price"] or rec["size"]:
                raise FormatError(f"{path}:{n}: departure rows leave side/price/size empty")
            out.append(TickEvent("departure", t, oid))
        else:
            raise FormatError(f"{path}:{n}: kind must be arrival or departure, got {kind!r}")
    return out


def read_trade_rows(path) -> list[RawTrade]:
    out = []
    prev = None
    for n, rec in read_csv(path, TRADE_HEADER):
        t = prev = _time(path, n, rec["time_ms"], prev)
        side = _side(path, n, rec["side"])
        _pos_float(path, n, "price", rec["price"])
        out.append(RawTrade(t, side, rec["price"], _pos_float(path, n, "size", rec["size"])))
    return out


# ---------------------------------------------------------------------------
# Observation files


def observation_rows(observations) -> Iterable[tuple]:
    from .analytics import skipping_cost

    for obs in observations:
        r, r_bp = skipping_cost(obs)
        yield (obs.k, int(obs.time) if float(obs.time).is_integer() else fmt_float(obs.time),
               obs.direction.value, fmt_float(obs.p), fmt_float(obs.b), fmt_float(obs.a),
               fmt_float(obs.m), fmt_float(r), fmt_float(r_bp))


def write_observations(path, observations, provenance: Mapping | None = None) -> None:
    write_csv(path, OBSERVATION_HEADER, observation_rows(observations), provenance)


def read_observations(path):
    from .analytics import TradeObservation

    out = []
    for n, rec in read_csv(path, OBSERVATION_HEADER):
        try:
            direction = Direction.parse(rec["direction"])
            t = float(rec["time_ms"])
            vals = [float(rec[c]) for c in ("p", "b", "a", "m")]
            k = int(rec["k"])
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from None
        out.append(TradeObservation(k, int(t) if t.is_integer() else t, direction, *vals))
    return out
