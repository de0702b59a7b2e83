"""Edge-density sweeps of the trading model.

For each density the sweep builds networks (independent Erdos-Renyi draws,
or the single core-periphery network), runs the model repeatedly and
reduces every run to a handful of numbers: trade count, mean skipping
cost, trade- and quote-price realized volatility and their log ratio ``z``.

Seeds. Network ``k`` at density index ``i`` is drawn from
``SeedSequence([seed, topology, i, k])``. Run ``r`` on network ``k`` uses
``SeedSequence([seed, k, r])`` whatever the density or topology: common
random numbers, so the differences between densities are not swamped by
run-to-run noise. Every run's seed is written out with its results.
"""
from __future__ import annotations

import math
import multiprocessing as mp
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytics import AnalyticsError, realized_volatility, z_ratio
from .common import Direction
from .formats import fmt_float, write_csv
from .network import CclNetwork, generate_core_periphery, generate_erdos_renyi, psi_for_density
from .simulator import ModelParams, SimulationError, run
from .simulator import _kernel as K

TOPOLOGIES = ("er", "cp")
DEFAULT_DENSITIES = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
K_MAX = 108
DEFAULT_L = 10
_TOPO_CODE = {"er": 0, "cp": 1}


@dataclass(frozen=True)
class SweepSpec:
    topology: str = "er"
    densities: tuple[float, ...] = DEFAULT_DENSITIES
    n: int = 64
    nets: int = 50  # networks per density (Erdos-Renyi only)
    runs: int = 20  # runs per network
    seed: int = 0
    model: dict = field(default_factory=dict)  # ModelParams overrides
    L: int = DEFAULT_L

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if not self.densities or any(not 0 < d <= 1 for d in self.densities):
            raise ValueError("densities must lie in (0, 1]")
        if self.n < 2 or self.nets < 1 or self.runs < 1 or self.L < 1:
            raise ValueError("n >= 2 and nets, runs, L >= 1 required")
        object.__setattr__(self, "densities", tuple(float(d) for d in self.densities))
        bad = set(self.model) - set(ModelParams.__dataclass_fields__)
        if bad or "n" in self.model or "seed" in self.model:
            raise ValueError(f"unsupported model overrides: {sorted(bad | ({'n', 'seed'} & set(self.model)))}")

    @property
    def n_networks(self) -> int:
        return self.nets if self.topology == "er" else 1

    def as_dict(self) -> dict:
        return asdict(self)


def network_for(spec: SweepSpec, d_idx: int, net_idx: int) -> CclNetwork:
    d = spec.densities[d_idx]
    if spec.topology == "cp":
        return generate_core_periphery(spec.n, psi_for_density(spec.n, d))
    ss = np.random.SeedSequence([spec.seed, _TOPO_CODE[spec.topology], d_idx, net_idx])
    return generate_erdos_renyi(spec.n, d, np.random.default_rng(ss))


def run_seed(spec: SweepSpec, net_idx: int, run_idx: int) -> int:
    words = np.random.SeedSequence([spec.seed, net_idx, run_idx]).generate_state(2, np.uint32)
    return int(words[0]) << 32 | int(words[1])


def per_run_k(D: int) -> int:
    return min(K_MAX, max(2, D // 5))


@dataclass
class RunResult:
    d_idx: int
    density: float
    realized_density: float
    net_idx: int
    run_idx: int
    seed: int
    network_id: str
    ok: bool = True
    error: str = ""
    n_trades: int = 0
    mean_skip: float = math.nan
    mean_skip_bp: float = math.nan
    # per direction: buy then sell
    D_buy: int = 0
    K_buy: int = 0
    v_A: float = math.nan
    v_a: float = math.nan
    z_buy: float = math.nan
    D_sell: int = 0
    K_sell: int = 0
    v_B: float = math.nan
    v_b: float = math.nan
    z_sell: float = math.nan
    v_trade: float = math.nan
    v_quote: float = math.nan
    z: float = math.nan


RUN_COLUMNS = tuple(RunResult.__dataclass_fields__)


def _nanmean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return math.fsum(vals) / len(vals) if vals else math.nan


def summarize_run(res: RunResult, trade_f: np.ndarray, trade_i: np.ndarray, L: int) -> None:
    res.n_trades = int(trade_f.shape[0])
    if res.n_trades:
        skip = trade_f[:, K.T_SKIP]
        res.mean_skip = math.fsum(skip.tolist()) / res.n_trades
        res.mean_skip_bp = math.fsum((skip / trade_f[:, K.T_MEAN_MID] * 1e4).tolist()) / res.n_trades
    for direction, tag, quote_col in ((Direction.BUYER_INITIATED, "buy", K.T_GLOBAL_ASK),
                                      (Direction.SELLER_INITIATED, "sell", K.T_GLOBAL_BID)):
        mask = trade_i[:, K.T_DIRECTION] == direction.code
        D = int(mask.sum())
        setattr(res, f"D_{tag}", D)
        if D < 2:
            continue
        k = per_run_k(D)
        setattr(res, f"K_{tag}", k)
        try:
            vt = realized_volatility(trade_f[mask, K.T_ACCEPTOR_QUOTE], k, L).value
            vq = realized_volatility(trade_f[mask, quote_col], k, L).value
        except AnalyticsError:
            continue
        trade_name, quote_name = ("v_A", "v_a") if tag == "buy" else ("v_B", "v_b")
        setattr(res, trade_name, vt)
        setattr(res, quote_name, vq)
        try:
            setattr(res, f"z_{tag}", z_ratio(vt, vq))
        except AnalyticsError:
            pass
    res.v_trade = _nanmean([res.v_A, res.v_B])
    res.v_quote = _nanmean([res.v_a, res.v_b])
    res.z = _nanmean([res.z_buy, res.z_sell])


def _work(args) -> list[RunResult]:
    spec, d_idx, net_idx, runs = args
    net = network_for(spec, d_idx, net_idx)
    nid = net.fingerprint()
    out = []
    for r in runs:
        seed = run_seed(spec, net_idx, r)
        res = RunResult(d_idx, spec.densities[d_idx], net.density(), net_idx, r, seed, nid)
        try:
            params = ModelParams(n=spec.n, seed=seed, **spec.model)
            sim = run(params, net, network_id=nid)
            summarize_run(res, sim.trade_f, sim.trade_i, spec.L)
        except (SimulationError, ValueError) as exc:
            res.ok = False
            res.error = f"{type(exc).__name__}: {exc}"
        out.append(res)
    return out


def _tasks(spec: SweepSpec, chunk: int) -> list[tuple]:
    tasks = []
    for d_idx in range(len(spec.densities)):
        for net_idx in range(spec.n_networks):
            for lo in range(0, spec.runs, chunk):
                tasks.append((spec, d_idx, net_idx, tuple(range(lo, min(lo + chunk, spec.runs)))))
    return tasks


def run_sweep(spec: SweepSpec, workers: int = 1, progress=None) -> list[RunResult]:
    """All runs, ordered by (density index, network index, run index)."""
    tasks = _tasks(spec, chunk=max(1, min(spec.runs, 20)))
    results: list[RunResult] = []
    if workers <= 1:
        for i, t in enumerate(tasks):
            results.extend(_work(t))
            if progress:
                progress(i + 1, len(tasks))
    else:
        ctx = mp.get_context("spawn")
        with ctx.Pool(workers) as pool:
            for i, chunk in enumerate(pool.imap_unordered(_work, tasks)):
                results.extend(chunk)
                if progress:
                    progress(i + 1, len(tasks))
    results.sort(key=lambda r: (r.d_idx, r.net_idx, r.run_idx))
    return results


@dataclass
class DensitySummary:
    d_idx: int
    density: float
    realized_density: float
    runs_ok: int
    runs_failed: int
    trades_mean: float
    trades_std: float
    skip_mean: float
    skip_std: float
    skip_bp_mean: float
    v_trade_mean: float
    v_trade_std: float
    v_quote_mean: float
    v_quote_std: float
    z_mean: float
    z_std: float
    z_count: int


SUMMARY_COLUMNS = tuple(DensitySummary.__dataclass_fields__)


def _mean_std(values: Sequence[float]) -> tuple[float, float, int]:
    vals = [v for v in values if not math.isnan(v)]
    n = len(vals)
    if n == 0:
        return math.nan, math.nan, 0
    m = math.fsum(vals) / n
    s = math.sqrt(math.fsum((v - m) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
    return m, s, n


def summarize(spec: SweepSpec, results: Sequence[RunResult]) -> list[DensitySummary]:
    """Per-density means and sample standard deviations over completed runs."""
    out = []
    for d_idx, d in enumerate(spec.densities):
        rows = [r for r in results if r.d_idx == d_idx]
        ok = [r for r in rows if r.ok]
        tm, ts, _ = _mean_std([float(r.n_trades) for r in ok])
        sm, ss, _ = _mean_std([r.mean_skip for r in ok])
        sbm, _, _ = _mean_std([r.mean_skip_bp for r in ok])
        vtm, vts, _ = _mean_std([r.v_trade for r in ok])
        vqm, vqs, _ = _mean_std([r.v_quote for r in ok])
        zm, zs, zn = _mean_std([r.z for r in ok])
        rd = _mean_std([r.realized_density for r in rows])[0] if rows else math.nan
        out.append(DensitySummary(d_idx, d, rd, len(ok), len(rows) - len(ok), tm, ts, sm, ss, sbm,
                                  vtm, vts, vqm, vqs, zm, zs, zn))
    return out


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def write_sweep(spec: SweepSpec, results: Sequence[RunResult], summary: Sequence[DensitySummary],
                out_dir, prefix: str | None = None) -> dict[str, Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    prefix = prefix or f"sweep_{spec.topology}"
    prov = {"sweep": spec.as_dict(), "model_defaults": ModelParams(n=spec.n).as_dict()}
    paths = {"runs": d / f"{prefix}_runs.csv", "summary": d / f"{prefix}_summary.csv"}
    write_csv(paths["runs"], RUN_COLUMNS,
              ([_cell(getattr(r, c)) for c in RUN_COLUMNS] for r in results), prov)
    write_csv(paths["summary"], SUMMARY_COLUMNS,
              ([_cell(getattr(s, c)) for c in SUMMARY_COLUMNS] for s in summary), prov)
    return paths
