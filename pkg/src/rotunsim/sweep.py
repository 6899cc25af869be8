"""Grid sweeps of config parameters scored by a step-response objective.

Spec file (same ``key = value`` format as configs)::

    scenario = e1:1            # builtin (e1:<speed>, e3:<impulse>, e4) or a scenario file path
    objective = overshoot      # overshoot | settling_time | rms_roll_err
    param.0.path = control.wheel.0.kp
    param.0.values = 30, 45, 60
    window.start = 3           # optional metric window, default from the timeline
    window.end = 6
    target_theta = 0.26        # optional, default from the timeline
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import experiments
from .config import ConfigError, apply_entries, load_scenario, parse_lines, resolve
from .control import ControlConfig
from .plant import PlantParams
from .sim import MeasurementModel, Scenario, run

OBJECTIVES = {
    "overshoot": "overshoot_frac",
    "settling_time": "settling_time",
    "rms_roll_err": "rms_roll_err",
}


@dataclass(frozen=True)
class SweepSpec:
    paths: tuple[str, ...]
    grids: tuple[tuple[float, ...], ...]
    objective: str
    scenario: str
    window: tuple[float, float | None] | None = None
    target_theta: float | None = None

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}", key="objective")
        if not self.paths or len(self.paths) != len(self.grids):
            raise ConfigError("need at least one parameter with a value grid", key="param")
        for path, grid in zip(self.paths, self.grids):
            if not grid:
                raise ConfigError("empty value grid", key=path)

    def points(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*self.grids))


@dataclass(frozen=True)
class SweepResult:
    values: tuple[float, ...]
    objective: float
    metrics: experiments.Metrics


def parse_sweep_spec(text: str) -> SweepSpec:
    rows: dict[int, dict[str, str]] = {}
    scalars: dict[str, str] = {}
    for line, key, value in parse_lines(text):
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "param" and parts[1].isdigit() and parts[2] in ("path", "values"):
            rows.setdefault(int(parts[1]), {})[parts[2]] = value
        elif key in ("scenario", "objective", "window.start", "window.end", "target_theta"):
            scalars[key] = value
        else:
            raise ConfigError("unknown key", line, key)
    for key in ("scenario", "objective"):
        if key not in scalars:
            raise ConfigError("missing required key", key=key)
    paths, grids = [], []
    for i, idx in enumerate(sorted(rows)):
        row = rows[idx]
        if idx != i or set(row) != {"path", "values"}:
            raise ConfigError("param rows need path and values, numbered 0..n-1", key=f"param.{idx}")
        try:
            grid = tuple(float(v) for v in row["values"].split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"bad value list {row['values']!r}", key=f"param.{idx}.values") from None
        # a throwaway apply rejects paths that are not config keys
        apply_entries([(None, row["path"], repr(grid[0]) if grid else "0")],
                      PlantParams(), ControlConfig(), MeasurementModel(), True)
        paths.append(row["path"])
        grids.append(grid)
    window = None
    if "window.start" in scalars:
        end = scalars.get("window.end")
        window = (float(scalars["window.start"]), float(end) if end is not None else None)
    target = float(scalars["target_theta"]) if "target_theta" in scalars else None
    return SweepSpec(tuple(paths), tuple(grids), scalars["objective"], scalars["scenario"], window, target)


def load_sweep_spec(path: str | Path) -> SweepSpec:
    spec = parse_sweep_spec(Path(path).read_text(encoding="utf-8"))
    ref = spec.scenario
    if ":" not in ref and ref != "e4" and not Path(ref).is_absolute():
        ref = str(Path(path).parent / ref)
        spec = SweepSpec(spec.paths, spec.grids, spec.objective, ref, spec.window, spec.target_theta)
    return spec


def scenario_from_ref(ref: str, seed: int | None = None) -> Scenario:
    kind, _, arg = ref.partition(":")
    if kind == "e1":
        return experiments.scenario_e1(float(arg or 1.0), seed or 0)
    if kind == "e3":
        return experiments.scenario_e3(float(arg) if arg else 66.0, seed or 0)
    if kind == "e4":
        return experiments.scenario_e4(seed or 0)
    scenario = load_scenario(ref)
    if seed is not None:
        scenario = Scenario(
            scenario.duration, scenario.command_timeline, scenario.disturbances, seed,
            scenario.params_override, scenario.control_override, scenario.name,
        )
    return scenario


def default_metric_window(scenario: Scenario) -> tuple[tuple[float, float | None], float]:
    """The first non-zero roll step of the timeline, or the whole run at zero target."""
    timeline = scenario.command_timeline
    for i, seg in enumerate(timeline):
        if seg.theta_hope != 0:
            end = timeline[i + 1].t_start if i + 1 < len(timeline) else None
            return (seg.t_start, end), seg.theta_hope
    return (0.0, None), 0.0


def _score(metrics: experiments.Metrics, objective: str) -> float:
    value = getattr(metrics, OBJECTIVES[objective])
    if metrics.capsized or math.isnan(value):
        return math.inf
    return value


def _evaluate(job) -> SweepResult:
    spec, scenario, params, cfg, measurement, values = job
    entries = [(None, path, repr(v)) for path, v in zip(spec.paths, values)]
    p, c, m = apply_entries(entries, params, cfg, measurement, True)
    p, c, m = resolve(scenario, p, c, m)
    window, target = default_metric_window(scenario)
    window = spec.window or window
    target = spec.target_theta if spec.target_theta is not None else target
    metrics = experiments.compute_metrics(run(scenario, p, c, m), target, window)
    return SweepResult(tuple(values), _score(metrics, spec.objective), metrics)


def run_sweep(
    spec: SweepSpec,
    params: PlantParams,
    cfg: ControlConfig,
    measurement: MeasurementModel,
    seed: int | None = None,
    workers: int = 1,
) -> list[SweepResult]:
    """Evaluate every grid point; sorted by objective, then parameter values in path order."""
    scenario = scenario_from_ref(spec.scenario, seed)
    jobs = [(spec, scenario, params, cfg, measurement, values) for values in spec.points()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(job) for job in jobs]
    return sorted(results, key=lambda r: (r.objective, r.values))


def format_results(spec: SweepSpec, results: list[SweepResult]) -> str:
    header = [*spec.paths, spec.objective, "overshoot_frac", "settling_time", "rms_roll_err", "capsized"]
    lines = [",".join(header)]
    for r in results:
        m = r.metrics
        cells = [*r.values, r.objective, m.overshoot_frac, m.settling_time, m.rms_roll_err]
        lines.append(",".join(f"{x:.9g}" for x in cells) + f",{int(m.capsized)}")
    return "\n".join(lines) + "\n"
