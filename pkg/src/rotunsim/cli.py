"""Command-line entry point: ``rotunsim {simulate,experiment,sweep,check}``.

Exit status is 0 on success, 1 on a domain error (bad config or scenario,
capsized run, failed check) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import experiments
from .config import load_config, load_scenario, resolve
from .checks import run_checks
from .control import Mode
from .plant import PlantError
from .sim import Scenario, Trajectory, run
from .sweep import format_results, load_sweep_spec, run_sweep
from .telemetry import UdpPublisher, parse_endpoint, write_csv

SEED_ENV = "ROTUNSIM_SEED"


class CliError(Exception):
    """Domain failure reported with exit status 1."""


def resolve_seed(cli_seed: int | None, fallback: int | None) -> int | None:
    """``--seed`` wins, then ``ROTUNSIM_SEED``, then ``fallback``."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV, "").strip()
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise CliError(f"{SEED_ENV}={env!r} is not an integer") from None
    return fallback


def _jsonable(obj):
    """asdict() output with NaN/inf mapped to None so the JSON stays strict."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _with_seed(scenario: Scenario, seed: int) -> Scenario:
    return replace(scenario, seed=seed)


def cmd_simulate(args) -> int:
    params, cfg, meas = load_config(args.config)
    scenario = load_scenario(args.scenario)
    scenario = _with_seed(scenario, resolve_seed(args.seed, scenario.seed))
    params, cfg, meas = resolve(scenario, params, cfg, meas)
    if args.udp:
        with UdpPublisher(*parse_endpoint(args.udp)) as pub:
            traj = run(scenario, params, cfg, meas, on_record=pub.send)
    else:
        traj = run(scenario, params, cfg, meas)
    write_csv(traj, args.out)
    if traj.capsized:
        raise CliError(f"run capsized at t={traj.records[-1].t:g} s (telemetry written to {args.out})")
    return 0


def _e1(out: Path, params, cfg, meas, seed) -> dict:
    summary = {}
    for speed in experiments.E1_SPEEDS:
        scenario = experiments.scenario_e1(speed, seed)
        for mode in Mode:
            traj = run(scenario, params, replace(cfg, mode=mode), meas)
            write_csv(traj, out / f"{scenario.name}_{mode.value}.csv")
            summary[f"{scenario.name}_{mode.value}"] = asdict(experiments.e1_metrics(traj))
    return summary


def _e2(out: Path, params, cfg, meas, seed) -> dict:
    summary = {}
    for name, scenario in experiments.scenario_e2(seed, params).items():
        traj = run(scenario, params, cfg, meas)
        write_csv(traj, out / f"{scenario.name}.csv")
        summary[name] = {"max_abs_theta": float(np.max(np.abs(traj.column("theta")))), "capsized": traj.capsized}
    return summary


def _e3(out: Path, params, cfg, meas, seed) -> dict:
    cal = experiments.calibrate_e3(params, cfg, meas, seed)
    write_csv(cal.trajectory, out / "e3.csv")
    return {
        "impulse": cal.impulse,
        "peak": cal.peak,
        "calibration_runs": cal.runs,
        "settle_time": experiments.e3_settle_time(cal.trajectory),
        "capsized": cal.trajectory.capsized,
    }


def e4_summary(traj: Trajectory) -> dict:
    t = traj.column("t")
    hold = t >= experiments.E4_DURATION - experiments.E4_HOLD - 1e-9
    return {
        "max_abs_theta_hold": float(np.max(np.abs(traj.column("theta")[hold]))),
        "mean_v_hold": float(np.mean(traj.column("v")[hold])),
        "capsized": traj.capsized,
    }


def _e4(out: Path, params, cfg, meas, seed) -> dict:
    traj = run(experiments.scenario_e4(seed), params, cfg, meas)
    write_csv(traj, out / "e4.csv")
    return e4_summary(traj)


def _compare(out: Path, params, cfg, meas, seed) -> list:
    rows = experiments.compare_stability(params, cfg, meas, seed)
    return [asdict(row) for row in rows]


EXPERIMENTS = {
    "e1": (_e1, "metrics.json"),
    "e2": (_e2, "metrics.json"),
    "e3": (_e3, "metrics.json"),
    "e4": (_e4, "metrics.json"),
    "compare": (_compare, "compare.json"),
}


def cmd_experiment(args) -> int:
    params, cfg, meas = load_config(args.config)
    seed = resolve_seed(args.seed, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fn, summary_name = EXPERIMENTS[args.name]
    _write_json(out / summary_name, fn(out, params, cfg, meas, seed))
    return 0


def cmd_sweep(args) -> int:
    params, cfg, meas = load_config(args.config)
    spec = load_sweep_spec(args.spec)
    # None keeps each builtin or file scenario's own seed
    seed = resolve_seed(args.seed, None)
    results = run_sweep(spec, params, cfg, meas, seed=seed, workers=args.workers)
    Path(args.out).write_bytes(format_results(spec, results).encode("ascii"))
    return 0


def cmd_check(args) -> int:
    ok = True
    for res in run_checks(quick=not args.full):
        ok &= res.passed
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.value:.3g} ({res.detail})")
    return 0 if ok else 1


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotunsim", description="Spherical robot roll-stabilization simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario file and write its telemetry CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--config", help="config file (default: shipped defaults)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.add_argument("--udp", metavar="HOST:PORT", help="also publish each record as a UDP datagram")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a named experiment and write CSVs plus a JSON summary")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="grid-evaluate config parameters against a step-response objective")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run the plant invariant checks")
    p.add_argument("--full", action="store_true", help="use the finest integrator reference (slower)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, PlantError, ValueError, OSError) as exc:
        print(f"rotunsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
