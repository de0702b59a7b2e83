"""Simulator output as CSV files and as trade observations."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..analytics import TradeObservation
from ..common import Direction
from ..formats import fmt_float, write_csv
from . import _kernel as K
from .model import SimOutput

TRADES_HEADER = ("time", "price", "buyer", "seller", "direction", "global_best", "skipping_cost", "mean_mid",
                 "acceptor_quote", "global_bid", "global_ask")
QUOTES_HEADER = ("step_time", "global_max_buy", "global_min_sell")


def observations(out: SimOutput) -> list[TradeObservation]:
    """One observation per recorded trade.

    The observed price is the acceptor's quote, the level the initiator
    actually reached, so the skipping cost is the distance from that quote
    to the global best (zero whenever the acceptor held the best quote).
    ``m`` is the mean institution mid at the trade.
    """
    f, i = out.trade_f, out.trade_i
    return [
        TradeObservation(
            k, float(f[k, K.T_TIME]), Direction.from_code(int(i[k, K.T_DIRECTION])),
            float(f[k, K.T_ACCEPTOR_QUOTE]), float(f[k, K.T_GLOBAL_BID]), float(f[k, K.T_GLOBAL_ASK]),
            float(f[k, K.T_MEAN_MID]),
        )
        for k in range(out.n_trades)
    ]


def run_provenance(out: SimOutput) -> dict:
    return {"params": out.params.as_dict(), "network_id": out.network_id, "meta": out.meta}


def write_run(out: SimOutput, out_dir, stem: str = "run", provenance: dict | None = None) -> dict[str, Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    prov = provenance if provenance is not None else run_provenance(out)
    f, i = out.trade_f, out.trade_i
    rows = (
        (fmt_float(f[k, K.T_TIME]), fmt_float(f[k, K.T_PRICE]), int(i[k, K.T_BUYER]), int(i[k, K.T_SELLER]),
         Direction.from_code(int(i[k, K.T_DIRECTION])).value, fmt_float(f[k, K.T_GLOBAL_BEST]),
         fmt_float(f[k, K.T_SKIP]), fmt_float(f[k, K.T_MEAN_MID]), fmt_float(f[k, K.T_ACCEPTOR_QUOTE]),
         fmt_float(f[k, K.T_GLOBAL_BID]), fmt_float(f[k, K.T_GLOBAL_ASK]))
        for k in range(out.n_trades)
    )
    paths = {"trades": d / f"{stem}_trades.csv", "quotes": d / f"{stem}_quotes.csv"}
    write_csv(paths["trades"], TRADES_HEADER, rows, prov)
    times = out.step_times
    q = out.quotes
    write_csv(paths["quotes"], QUOTES_HEADER,
              ((fmt_float(times[k]), fmt_float(q[k, 0]), fmt_float(q[k, 1])) for k in range(q.shape[0])), prov)
    return paths


def direction_arrays(out: SimOutput, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Observed trade prices and matching global quotes for one direction."""
    mask = out.trade_i[:, K.T_DIRECTION] == direction.code
    quote_col = K.T_GLOBAL_ASK if direction is Direction.BUYER_INITIATED else K.T_GLOBAL_BID
    return out.trade_f[mask, K.T_ACCEPTOR_QUOTE], out.trade_f[mask, quote_col]
