"""Flat ``dotted.key = value`` config and scenario files.

Config keys::

    plant.<field>                       any PlantParams field
    control.mode                        with_wheel | baseline_no_wheel
    control.integral_clamp, control.rate_filter_alpha, control.baseline_kd
    control.pendulum.<i>.{threshold,kp,ki}
    control.wheel.<i>.{threshold,kp,kd}
    measurement.{enabled,theta_noise_std,rate_noise_std}

Scenario keys::

    name, duration, seed
    timeline.<i>.{t,v_hope,theta_hope}
    disturbance.<i>.{kind,t_start,t_end,magnitude,noise_cutoff}
    override.<config key>               applied on top of the loaded config

``#`` starts a comment. Unknown keys are rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .control import ControlConfig, GainSchedule, GainSegment, Mode
from .plant import WHEEL_MASS, ParamError, PlantParams, disc_inertia
from .sim import DisturbanceSpec, MeasurementModel, Scenario, ScenarioError, TimelineSegment


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{key + ': ' if key else ''}{message}")
        self.line = line
        self.key = key


PLANT_KEYS = tuple(f.name for f in fields(PlantParams))
_SCHEDULE_RE = re.compile(r"^control\.(pendulum|wheel)\.(\d+)\.(threshold|kp|ki|kd)$")
_SCHEDULE_FIELD = {"pendulum": "ki", "wheel": "kd"}
_CONTROL_SCALARS = ("integral_clamp", "rate_filter_alpha", "baseline_kd")


def default_config_path() -> Path:
    return Path(str(resources.files("rotunsim") / "data" / "default.cfg"))


def scenario_dir() -> Path:
    return Path(str(resources.files("rotunsim") / "data" / "scenarios"))


def parse_lines(text: str) -> list[tuple[int, str, str]]:
    """Split into ``(line_no, key, value)`` entries; duplicate keys are an error."""
    entries = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError("empty key or value", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key (first on line {seen[key]})", lineno, key)
        seen[key] = lineno
        entries.append((lineno, key, value))
    return entries


def _float(value: str, key: str, line: int | None) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"not a number: {value!r}", line, key) from None
    if math.isnan(x):
        raise ConfigError("NaN is not allowed", line, key)
    return x


def _bool(value: str, key: str, line: int | None) -> bool:
    low = value.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}", line, key)


def _schedule(rows: dict[int, dict[str, float]], kind: str, base: GainSchedule | None) -> GainSchedule:
    second = _SCHEDULE_FIELD[kind]
    if base is not None:
        merged = {
            i: {"threshold": seg.threshold, "kp": seg.kp, second: seg.ki_or_kd}
            for i, seg in enumerate(base.segments)
        }
        for idx, row in rows.items():
            merged.setdefault(idx, {}).update(row)
        rows = merged
    segments = []
    for i, idx in enumerate(sorted(rows)):
        if idx != i:
            raise ConfigError(f"control.{kind} rows must be numbered 0..n-1", key=f"control.{kind}.{idx}")
        row = rows[idx]
        missing = {"threshold", "kp", second} - row.keys()
        if missing:
            raise ConfigError(f"missing {', '.join(sorted(missing))}", key=f"control.{kind}.{idx}")
        segments.append(GainSegment(row["threshold"], row["kp"], row[second]))
    try:
        return GainSchedule(tuple(segments))
    except ValueError as exc:
        raise ConfigError(str(exc), key=f"control.{kind}") from None


def apply_entries(
    entries: Iterable[tuple[int | None, str, str]],
    params: PlantParams,
    cfg: ControlConfig,
    measurement: MeasurementModel,
    patch_schedules: bool = False,
) -> tuple[PlantParams, ControlConfig, MeasurementModel]:
    """Apply config entries on top of existing objects, validating every key.

    Gain-schedule rows replace the whole schedule unless ``patch_schedules``
    is set, in which case they edit individual cells of the current one.
    """
    plant_kw: dict[str, float] = {}
    control_kw: dict[str, object] = {}
    meas_kw: dict[str, object] = {}
    schedules: dict[str, dict[int, dict[str, float]]] = {}
    for line, key, value in entries:
        section, _, name = key.partition(".")
        if section == "plant" and name in PLANT_KEYS:
            plant_kw[name] = _float(value, key, line)
        elif section == "control" and name == "mode":
            try:
                control_kw["mode"] = Mode(value)
            except ValueError:
                raise ConfigError(f"unknown mode {value!r}", line, key) from None
        elif section == "control" and name in _CONTROL_SCALARS:
            control_kw[name] = _float(value, key, line)
        elif (match := _SCHEDULE_RE.match(key)) is not None:
            kind, idx, fld = match.group(1), int(match.group(2)), match.group(3)
            if fld not in ("threshold", "kp", _SCHEDULE_FIELD[kind]):
                raise ConfigError("unknown key", line, key)
            schedules.setdefault(kind, {}).setdefault(idx, {})[fld] = _float(value, key, line)
        elif section == "measurement" and name == "enabled":
            meas_kw["enabled"] = _bool(value, key, line)
        elif section == "measurement" and name in ("theta_noise_std", "rate_noise_std"):
            meas_kw[name] = _float(value, key, line)
        else:
            raise ConfigError("unknown key", line, key)

    if "d_w" in plant_kw and "J_w" not in plant_kw:
        plant_kw["J_w"] = disc_inertia(WHEEL_MASS, plant_kw["d_w"])
    try:
        params = replace(params, **plant_kw)
    except ParamError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], key=f"plant.{exc.key}") from None
    for kind, rows in schedules.items():
        base = getattr(cfg, f"{kind}_schedule") if patch_schedules else None
        control_kw[f"{kind}_schedule"] = _schedule(rows, kind, base)
    try:
        cfg = replace(cfg, **control_kw)
        measurement = replace(measurement, **meas_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return params, cfg, measurement


def parse_config(text: str) -> tuple[PlantParams, ControlConfig, MeasurementModel]:
    return apply_entries(parse_lines(text), PlantParams(), ControlConfig(), MeasurementModel())


def load_config(path: str | Path | None = None) -> tuple[PlantParams, ControlConfig, MeasurementModel]:
    """Read a config file; ``None`` loads the shipped defaults."""
    path = Path(path) if path is not None else default_config_path()
    return parse_config(path.read_text(encoding="utf-8"))


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def dump_config(params: PlantParams, cfg: ControlConfig, measurement: MeasurementModel) -> str:
    lines = [f"plant.{name} = {_num(getattr(params, name))}" for name in PLANT_KEYS]
    lines.append(f"control.mode = {cfg.mode.value}")
    for name in _CONTROL_SCALARS:
        lines.append(f"control.{name} = {_num(getattr(cfg, name))}")
    for kind, schedule in (("pendulum", cfg.pendulum_schedule), ("wheel", cfg.wheel_schedule)):
        for i, seg in enumerate(schedule.segments):
            lines.append(f"control.{kind}.{i}.threshold = {_num(seg.threshold)}")
            lines.append(f"control.{kind}.{i}.kp = {_num(seg.kp)}")
            lines.append(f"control.{kind}.{i}.{_SCHEDULE_FIELD[kind]} = {_num(seg.ki_or_kd)}")
    lines.append(f"measurement.enabled = {'true' if measurement.enabled else 'false'}")
    lines.append(f"measurement.theta_noise_std = {_num(measurement.theta_noise_std)}")
    lines.append(f"measurement.rate_noise_std = {_num(measurement.rate_noise_std)}")
    return "\n".join(lines) + "\n"


def write_config(path: str | Path, params: PlantParams, cfg: ControlConfig, measurement: MeasurementModel) -> None:
    Path(path).write_text(dump_config(params, cfg, measurement), encoding="utf-8")


_TIMELINE_RE = re.compile(r"^timeline\.(\d+)\.(t|v_hope|theta_hope)$")
_DIST_RE = re.compile(r"^disturbance\.(\d+)\.(kind|t_start|t_end|magnitude|noise_cutoff)$")


def _indexed(rows: dict[int, dict[str, str]], prefix: str) -> list[dict[str, str]]:
    out = []
    for i, idx in enumerate(sorted(rows)):
        if idx != i:
            raise ConfigError(f"{prefix} entries must be numbered 0..n-1", key=f"{prefix}.{idx}")
        out.append(rows[idx])
    return out


def parse_scenario(text: str) -> Scenario:
    scalars: dict[str, tuple[int, str]] = {}
    timeline: dict[int, dict[str, str]] = {}
    dists: dict[int, dict[str, str]] = {}
    overrides: dict[str, str] = {}
    for line, key, value in parse_lines(text):
        if key in ("name", "duration", "seed"):
            scalars[key] = (line, value)
        elif (m := _TIMELINE_RE.match(key)) is not None:
            timeline.setdefault(int(m.group(1)), {})[m.group(2)] = value
        elif (m := _DIST_RE.match(key)) is not None:
            dists.setdefault(int(m.group(1)), {})[m.group(2)] = value
        elif key.startswith("override."):
            target = key[len("override."):]
            # validate against a throwaway config so bad overrides fail at load time
            apply_entries([(line, target, value)], PlantParams(), ControlConfig(), MeasurementModel(), True)
            overrides[target] = value
        else:
            raise ConfigError("unknown key", line, key)

    if "duration" not in scalars:
        raise ConfigError("missing required key", key="duration")
    line, raw = scalars["duration"]
    duration = _float(raw, "duration", line)
    seed = 0
    if "seed" in scalars:
        line, raw = scalars["seed"]
        try:
            seed = int(raw, 0)
        except ValueError:
            raise ConfigError(f"not an integer: {raw!r}", line, "seed") from None

    segments = []
    for i, row in enumerate(_indexed(timeline, "timeline")):
        if set(row) != {"t", "v_hope", "theta_hope"}:
            raise ConfigError("needs t, v_hope and theta_hope", key=f"timeline.{i}")
        segments.append(TimelineSegment(*(_float(row[k], f"timeline.{i}.{k}", None) for k in ("t", "v_hope", "theta_hope"))))

    disturbances = []
    for i, row in enumerate(_indexed(dists, "disturbance")):
        missing = {"kind", "t_start", "t_end", "magnitude"} - row.keys()
        if missing:
            raise ConfigError(f"missing {', '.join(sorted(missing))}", key=f"disturbance.{i}")
        numbers = {k: _float(v, f"disturbance.{i}.{k}", None) for k, v in row.items() if k != "kind"}
        try:
            disturbances.append(DisturbanceSpec(row["kind"], **numbers))
        except ValueError as exc:
            raise ConfigError(str(exc), key=f"disturbance.{i}") from None

    params_override = {k: v for k, v in overrides.items() if k.startswith("plant.")}
    control_override = {k: v for k, v in overrides.items() if not k.startswith("plant.")}
    name = scalars["name"][1] if "name" in scalars else ""
    try:
        return Scenario(duration, segments, disturbances, seed, params_override, control_override, name)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def dump_scenario(scenario: Scenario) -> str:
    lines = []
    if scenario.name:
        lines.append(f"name = {scenario.name}")
    lines.append(f"duration = {_num(scenario.duration)}")
    lines.append(f"seed = {scenario.seed}")
    for i, seg in enumerate(scenario.command_timeline):
        lines.append(f"timeline.{i}.t = {_num(seg.t_start)}")
        lines.append(f"timeline.{i}.v_hope = {_num(seg.v_hope)}")
        lines.append(f"timeline.{i}.theta_hope = {_num(seg.theta_hope)}")
    for i, d in enumerate(scenario.disturbances):
        lines.append(f"disturbance.{i}.kind = {d.kind.value}")
        lines.append(f"disturbance.{i}.t_start = {_num(d.t_start)}")
        lines.append(f"disturbance.{i}.t_end = {_num(d.t_end)}")
        lines.append(f"disturbance.{i}.magnitude = {_num(d.magnitude)}")
        if d.noise_cutoff:
            lines.append(f"disturbance.{i}.noise_cutoff = {_num(d.noise_cutoff)}")
    for key, value in {**scenario.params_override, **scenario.control_override}.items():
        lines.append(f"override.{key} = {value}")
    return "\n".join(lines) + "\n"


def write_scenario(path: str | Path, scenario: Scenario) -> None:
    Path(path).write_text(dump_scenario(scenario), encoding="utf-8")


def resolve(
    scenario: Scenario,
    params: PlantParams,
    cfg: ControlConfig,
    measurement: MeasurementModel,
) -> tuple[PlantParams, ControlConfig, MeasurementModel]:
    """Config with the scenario's overrides applied."""
    overrides: Mapping[str, str] = {**scenario.params_override, **scenario.control_override}
    if not overrides:
        return params, cfg, measurement
    return apply_entries(((None, k, v) for k, v in overrides.items()), params, cfg, measurement, True)
