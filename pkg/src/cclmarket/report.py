"""Analysis tables over one or more days of trade observations.

Output schemas:

``table2_skipping.csv``
    normalised skipping cost (bp) per direction: n, min, median, max, mean, std
``table3_correlations.csv``
    rho(f, g) and rho(f, h) per direction with bootstrap standard errors
``table4_volatility_days.csv``
    per-day, per-direction trade- and quote-price realized volatility and z
``table4_volatility_correlation.csv``
    rho between trade- and quote-price volatility across days, per direction
``table5_z.csv``
    mean and standard deviation of z across days, per direction
``ecdf_<direction>.csv``, ``signature_<direction>.csv``
    point sets for the skipping-cost ECDF/survivor curves and volatility
    signature plots

Each table is computed independently; a table lacking data for some row
writes a ``status`` of ``skipped`` and the reason instead of failing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytics import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_K,
    DEFAULT_L,
    AnalyticsError,
    TradeObservation,
    bootstrap_correlation,
    decomposition_check,
    direction_volatility,
    ecdf_summary,
    price_change_series,
    skipping_cost,
    volatility_signature,
)
from .common import Direction
from .formats import fmt_float, write_csv

SIGNATURE_K = tuple(range(50, 501, 50))
_TABLE_CODE = {"table3": 3, "table4": 4}
_PAIR_CODE = {"f,g": 0, "f,h": 1}


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def _mean_std(vals: Sequence[float]) -> tuple[float, float]:
    n = len(vals)
    m = math.fsum(vals) / n
    s = math.sqrt(math.fsum((v - m) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
    return m, s


def day_label(path) -> str:
    """File stem without a trailing role suffix: ``x_ticks.csv`` and ``x_truth.csv`` are both day ``x``."""
    stem = Path(path).stem
    for suffix in ("_ticks", "_trades", "_truth", "_observations"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


@dataclass
class Day:
    day_id: str
    observations: list[TradeObservation]


@dataclass
class Analysis:
    K: int
    L: int
    directions: tuple[Direction, ...]
    tables: dict[str, tuple[tuple[str, ...], list[list]]] = field(default_factory=dict)
    points: dict[str, tuple[tuple[str, ...], list[list]]] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def write(self, out_dir, provenance: dict | None = None) -> dict[str, Path]:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        prov = dict(provenance or {})
        prov.setdefault("analysis", {"K": self.K, "L": self.L, "directions": [x.value for x in self.directions]})
        paths = {}
        for name, (header, rows) in {**self.tables, **self.points}.items():
            p = d / f"{name}.csv"
            write_csv(p, header, ([_cell(v) for v in row] for row in rows), prov)
            paths[name] = p
        p = d / "analysis_manifest.json"
        p.write_text(json.dumps(self.manifest, indent=1, sort_keys=True) + "\n")
        paths["manifest"] = p
        return paths


def _bootstrap_rng(seed: int, table: str, direction: Direction, pair: str) -> np.random.Generator:
    words = [seed, _TABLE_CODE[table], int(direction is Direction.SELLER_INITIATED), _PAIR_CODE.get(pair, 0)]
    return np.random.default_rng(np.random.SeedSequence(words))


def analyze_days(days: Sequence[Day], *, K: int = DEFAULT_K, L: int = DEFAULT_L,
                 directions: Sequence[Direction] = tuple(Direction), seed: int = 0,
                 n_resamples: int = DEFAULT_BOOTSTRAP,
                 signature_k: Sequence[int] = SIGNATURE_K) -> Analysis:
    directions = tuple(directions)
    res = Analysis(K, L, directions)
    res.manifest = {"days": [d.day_id for d in days], "K": K, "L": L, "seed": seed,
                    "bootstrap_resamples": n_resamples, "trades": {}, "decomposition_max_residual": {}}

    by_dir: dict[Direction, list[list[TradeObservation]]] = {x: [] for x in directions}
    for day in days:
        for x in directions:
            by_dir[x].append([o for o in day.observations if o.direction is x])

    # Table 2 and ECDF points
    t2 = []
    for x in directions:
        bps = [skipping_cost(o)[1] for obs in by_dir[x] for o in obs]
        res.manifest["trades"][x.value] = len(bps)
        if not bps:
            t2.append([x.value, 0, None, None, None, None, None, "skipped", "no trades"])
            continue
        s = ecdf_summary(bps)
        t2.append([x.value, s.n, s.min, s.median, s.max, s.mean, s.std, "ok", ""])
        res.points[f"ecdf_{x.short}"] = (("r_norm_bp", "ecdf", "survivor"),
                                         [[float(a), float(b), float(c)] for a, b, c in zip(s.x, s.ecdf, s.survivor)])
    res.tables["table2_skipping"] = (
        ("direction", "n", "min", "median", "max", "mean", "std", "status", "reason"), t2)

    # Table 3: changes are taken within a day, then pooled
    t3 = []
    for x in directions:
        recs = [r for obs in by_dir[x] for r in price_change_series(obs)]
        res.manifest["decomposition_max_residual"][x.value] = decomposition_check(recs)
        f = np.array([r.f for r in recs])
        for pair, other in (("f,g", [r.g for r in recs]), ("f,h", [r.h for r in recs])):
            try:
                bc = bootstrap_correlation(f, np.array(other), n_resamples, _bootstrap_rng(seed, "table3", x, pair))
                t3.append([x.value, pair, len(recs), bc.rho, bc.stderr, bc.n_resamples, bc.n_degenerate, "ok", ""])
            except AnalyticsError as exc:
                t3.append([x.value, pair, len(recs), None, None, 0, 0, "skipped", str(exc)])
    res.tables["table3_correlations"] = (
        ("direction", "pair", "n", "rho", "stderr", "resamples", "degenerate", "status", "reason"), t3)

    # Table 4 per day, then its cross-day correlation and Table 5
    t4d, t4c, t5 = [], [], []
    sig_rows: dict[Direction, list[list]] = {x: [] for x in directions}
    for x in directions:
        vt, vq, zs = [], [], []
        for day, obs in zip(days, by_dir[x]):
            try:
                dv = direction_volatility(obs, x, K, L)
            except AnalyticsError as exc:
                t4d.append([day.day_id, x.value, len(obs), K, L, None, None, None, "skipped", str(exc)])
            else:
                t4d.append([day.day_id, x.value, dv.trade.D, K, L, dv.trade.value, dv.quote.value, dv.z,
                            "ok" if dv.z is not None else "partial", "" if dv.z is not None else "z undefined"])
                vt.append(dv.trade.value)
                vq.append(dv.quote.value)
                if dv.z is not None:
                    zs.append(dv.z)
            buy = x is Direction.BUYER_INITIATED
            for series, prices in (("trade", [o.p for o in obs]), ("quote", [o.a if buy else o.b for o in obs])):
                if not prices:
                    continue
                for row in volatility_signature(prices, signature_k, L):
                    sig_rows[x].append([day.day_id, series, row.K, L, row.value, row.error or ""])
        try:
            bc = bootstrap_correlation(np.array(vt), np.array(vq), n_resamples, _bootstrap_rng(seed, "table4", x, ""))
            t4c.append([x.value, len(vt), bc.rho, bc.stderr, bc.n_resamples, bc.n_degenerate, "ok", ""])
        except AnalyticsError as exc:
            t4c.append([x.value, len(vt), None, None, 0, 0, "skipped", str(exc)])
        if zs:
            zm, zsd = _mean_std(zs)
            t5.append([x.value, len(zs), zm, zsd, "ok", ""])
        else:
            t5.append([x.value, 0, None, None, "skipped", "no day with a defined z"])
        res.points[f"signature_{x.short}"] = (("day", "series", "K", "L", "value", "error"), sig_rows[x])
    res.tables["table4_volatility_days"] = (
        ("day", "direction", "D", "K", "L", "v_trade", "v_quote", "z", "status", "reason"), t4d)
    res.tables["table4_volatility_correlation"] = (
        ("direction", "n_days", "rho", "stderr", "resamples", "degenerate", "status", "reason"), t4c)
    res.tables["table5_z"] = (("direction", "n_days", "z_mean", "z_std", "status", "reason"), t5)
    return res
