"""Command-line driver: ``sweep``, ``analyze`` and ``generate``.

Settings come from flags, then from the ``--config`` file, then from
defaults. Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import DEFAULT_BOOTSTRAP, DEFAULT_K, DEFAULT_L, AnalyticsError
from .common import Direction
from .config import ConfigError, read_config
from .engine import EngineError, write_engine_day
from .formats import FormatError, params_hash, read_observations, write_observations
from .ingest import IntegrityError, ingest_day
from .network import (
    GenerationFailure,
    InvalidNetworkError,
    generate_core_periphery,
    generate_erdos_renyi,
    psi_for_density,
    write_edge_list,
)
from .report import Day, analyze_days, day_label
from .scenario import ScenarioError, load_scenario, random_scenario, run_scenario
from .simulator import ModelParams, SimulationError, observations, run, write_run
from .sweep import DEFAULT_DENSITIES, SweepSpec, run_sweep, summarize, write_sweep

log = logging.getLogger("cclmarket")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

_MODEL_KEYS = {
    "epsilon": float, "kappa": float, "gamma": float, "m0_bar": float, "dt": float,
    "t_burn": float, "t_end": float, "init_budget": int, "resolve_cap": int, "pairing": str,
}
_DEFAULTS = {
    "seed": 0, "out_dir": "out", "workers": 1,
    "topology": "er", "densities": ",".join(str(d) for d in DEFAULT_DENSITIES),
    "n": 64, "nets": 50, "runs": None, "l_sweep": 10,
    "k": DEFAULT_K, "l": DEFAULT_L, "direction": "both", "resamples": DEFAULT_BOOTSTRAP, "window_ms": 1000,
}
_INT_KEYS = {"seed", "workers", "n", "nets", "runs", "k", "l", "resamples", "window_ms", "net_seed"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(p: argparse.ArgumentParser) -> None:
    # SUPPRESS: a flag given before the subcommand must survive the subparser's defaults
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed (default 0)")
    p.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default ./out)")
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    p.add_argument("--config", default=argparse.SUPPRESS, help="key = value settings file")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _global_flags(common)
    p = _Parser(prog="cclmarket", description="Counterparty-credit-limit market toolkit.", parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", parents=[common], help="edge-density sweep of the trading model")
    s.add_argument("--topology", choices=("er", "cp", "both"))
    s.add_argument("--densities", help="comma-separated densities in (0, 1]")
    s.add_argument("--n", type=int, help="institutions (default 64)")
    s.add_argument("--nets", type=int, help="networks per density, Erdos-Renyi only (default 50)")
    s.add_argument("--runs", type=int, help="runs per network (default 20 for er, 200 for cp)")
    s.add_argument("--l", dest="l_sweep", type=int, help="volatility sub-samples (default 10)")

    a = sub.add_parser("analyze", parents=[common], help="tables from observation files or tick/trade days")
    a.add_argument("observations", nargs="*", help="observation CSV files, one per day")
    a.add_argument("--ticks", action="append", default=[], help="tick file (pair with --trades)")
    a.add_argument("--trades", action="append", default=[], help="trade file (pair with --ticks)")
    a.add_argument("--k", type=int, help=f"volatility intervals (default {DEFAULT_K})")
    a.add_argument("--l", type=int, help=f"volatility sub-samples (default {DEFAULT_L})")
    a.add_argument("--direction", choices=("buy", "sell", "both"))
    a.add_argument("--exclude-ambiguous", action="store_true", help="drop trades with tied departures")
    a.add_argument("--window-ms", type=int, help="association window (default 1000)")
    a.add_argument("--resamples", type=int, help=f"bootstrap resamples (default {DEFAULT_BOOTSTRAP})")

    g = sub.add_parser("generate", parents=[common], help="synthetic engine days, networks and model runs")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scripted order flow (JSON) to replay through the engine")
    src.add_argument("--random-day", action="store_true", help="replay a random scenario")
    src.add_argument("--topology", choices=("er", "cp"), help="write a CCL network edge list")
    g.add_argument("--stem", default=None, help="output file stem")
    g.add_argument("--actions", type=int, default=300, help="random-day length")
    g.add_argument("--density", type=float)
    g.add_argument("--psi", type=float)
    g.add_argument("--net-seed", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--simulate", action="store_true", help="also run the model on the generated network")
    return p


def _settings(args: argparse.Namespace) -> dict:
    """Merge flags over config-file values over defaults."""
    config = getattr(args, "config", None)
    cfg = read_config(config) if config else {}
    cfg = {("l_sweep" if k == "l" and args.command == "sweep" else k): v for k, v in cfg.items()}
    known = set(_DEFAULTS) | set(_MODEL_KEYS) | {"net_seed", "density", "psi"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    out = dict(_DEFAULTS)
    for k, v in cfg.items():
        try:
            if k in _INT_KEYS:
                out[k] = int(v)
            elif k in _MODEL_KEYS:
                out[k] = _MODEL_KEYS[k](v)
            elif k in ("density", "psi"):
                out[k] = float(v)
            else:
                out[k] = v
        except ValueError:
            raise UsageError(f"config key {k}: bad value {v!r}") from None
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            out[k] = v
    return out


def _model_overrides(st: dict) -> dict:
    return {k: st[k] for k in _MODEL_KEYS if k in st}


def _parse_densities(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad density list {text!r}") from None
    if not vals:
        raise UsageError("empty density list")
    return vals


def cmd_sweep(st: dict) -> int:
    topologies = ("er", "cp") if st["topology"] == "both" else (st["topology"],)
    out_dir = Path(st["out_dir"])
    manifest = {"command": "sweep", "version": __version__, "outputs": {}}
    for topo in topologies:
        runs = st["runs"] if st["runs"] is not None else (20 if topo == "er" else 200)
        try:
            spec = SweepSpec(topo, _parse_densities(st["densities"]), st["n"], st["nets"], runs, st["seed"],
                             _model_overrides(st), st["l_sweep"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        log.info("sweep %s: %d densities x %d nets x %d runs", topo, len(spec.densities), spec.n_networks, runs)
        results = run_sweep(spec, st["workers"], progress=lambda i, n: log.debug("task %d/%d", i, n))
        summary = summarize(spec, results)
        paths = write_sweep(spec, results, summary, out_dir)
        failed = sum(not r.ok for r in results)
        if failed:
            log.warning("%s: %d of %d runs failed", topo, failed, len(results))
        manifest["outputs"][topo] = {"spec": spec.as_dict(), "spec_hash": params_hash(spec.as_dict()),
                                     "runs": len(results), "failed": failed,
                                     "files": {k: v.name for k, v in paths.items()}}
    (out_dir / "sweep_manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_analyze(st: dict) -> int:
    if len(st["ticks"]) != len(st["trades"]):
        raise UsageError("--ticks and --trades must be given in pairs")
    if not st["observations"] and not st["ticks"]:
        raise UsageError("nothing to analyze: give observation files or --ticks/--trades pairs")
    days, reports = [], {}
    for path in st["observations"]:
        days.append(Day(day_label(path), read_observations(path)))
    for tp, rp in zip(st["ticks"], st["trades"]):
        obs, rep = ingest_day(tp, rp, window_ms=st["window_ms"], exclude_ambiguous=st["exclude_ambiguous"])
        day_id = day_label(tp)
        reports[day_id] = {k: v for k, v in vars(rep).items()} | {"session_valid": rep.session_valid}
        if not rep.session_valid:
            log.warning("%s: trading gap of 30 s or more; day excluded", day_id)
            continue
        days.append(Day(day_id, obs))
    directions = tuple(Direction) if st["direction"] == "both" else (Direction.parse(st["direction"]),)
    res = analyze_days(days, K=st["k"], L=st["l"], directions=directions, seed=st["seed"],
                       n_resamples=st["resamples"])
    res.manifest["ingest"] = reports
    res.manifest["exclude_ambiguous"] = bool(st.get("exclude_ambiguous"))
    res.write(st["out_dir"], {"command": "analyze", "K": st["k"], "L": st["l"], "seed": st["seed"],
                              "direction": st["direction"], "resamples": st["resamples"],
                              "inputs": [d.day_id for d in days]})
    return EXIT_OK


def cmd_generate(st: dict) -> int:
    out_dir = Path(st["out_dir"])
    if st.get("scenario") or st.get("random_day"):
        if st.get("random_day"):
            sc = random_scenario(np.random.default_rng(st["seed"]), n_actions=st["actions"])
            out_dir.mkdir(parents=True, exist_ok=True)
            stem = st.get("stem") or f"random_{st['seed']}"
            (out_dir / f"{stem}_scenario.json").write_text(sc.to_json() + "\n")
            prov = {"command": "generate", "random_day": True, "seed": st["seed"], "actions": st["actions"]}
        else:
            sc = load_scenario(st["scenario"])
            stem = st.get("stem") or Path(st["scenario"]).stem
            prov = {"command": "generate", "scenario": Path(st["scenario"]).name,
                    "scenario_hash": params_hash(json.loads(sc.to_json()))}
        eng = run_scenario(sc)
        write_engine_day(eng, out_dir, stem, prov)
        return EXIT_OK

    n = st["n"]
    if st["topology"] == "er":
        if st.get("density") is None:
            raise UsageError("--topology er needs --density")
        net_seed = st.get("net_seed", st["seed"])
        net = generate_erdos_renyi(n, st["density"], np.random.default_rng(net_seed))
        stem = st.get("stem") or f"er_n{n}_d{st['density']}_s{net_seed}"
    else:
        if (st.get("psi") is None) == (st.get("density") is None):
            raise UsageError("--topology cp needs exactly one of --psi and --density")
        psi = st["psi"] if st.get("psi") is not None else psi_for_density(n, st["density"])
        net = generate_core_periphery(n, psi)
        stem = st.get("stem") or f"cp_n{n}_psi{psi}"
    out_dir.mkdir(parents=True, exist_ok=True)
    write_edge_list(net, out_dir / f"{stem}.edges")
    if st.get("simulate"):
        try:
            params = ModelParams(n=n, seed=st["seed"], **_model_overrides(st))
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        out = run(params, net, network_id=net.fingerprint())
        write_run(out, out_dir, stem)
        write_observations(out_dir / f"{stem}_observations.csv", observations(out),
                           {"params": params.as_dict(), "network_id": net.fingerprint()})
    return EXIT_OK


_COMMANDS = {"sweep": cmd_sweep, "analyze": cmd_analyze, "generate": cmd_generate}
_DATA_ERRORS = (FormatError, IntegrityError, ScenarioError, AnalyticsError, InvalidNetworkError,
                GenerationFailure, SimulationError, EngineError, OSError)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        st = _settings(args)
        if st["workers"] < 1:
            raise UsageError("--workers must be at least 1")
        return _COMMANDS[args.command](st)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
