"""Closed-loop scheduler: 1 kHz physics, 100 Hz control with zero-order hold."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, NamedTuple

import numpy as np

from . import control
from .control import ControlConfig, ControllerState, Measurement, Setpoints
from .plant import CapsizeError, PlantInputs, PlantParams, PlantState, step_rk4

PHYSICS_DT = 0.001
CONTROL_PERIOD = 0.01
SUBSTEPS = 10

# Philox key words for the independent random streams of one run
_SENSOR_STREAM = 0xFFFF_FFFF
_SEED_MASK = (1 << 64) - 1


class ScenarioError(ValueError):
    pass


class DisturbanceKind(str, Enum):
    IMPULSE = "impulse"
    BAND_NOISE = "band_noise"
    CONSTANT = "constant"


@dataclass(frozen=True)
class DisturbanceSpec:
    """Roll-torque disturbance.

    ``magnitude`` is N·m for constant torques, N·m·s for impulses (delivered
    within the single physics step starting at ``t_start``) and, for band
    noise, the standard deviation in N·m of the white sequence fed to a
    unity-DC-gain first-order low-pass at ``noise_cutoff`` Hz.
    """

    kind: DisturbanceKind
    t_start: float
    t_end: float
    magnitude: float
    noise_cutoff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DisturbanceKind(self.kind))
        if not all(math.isfinite(x) for x in (self.t_start, self.t_end, self.magnitude, self.noise_cutoff)):
            raise ScenarioError("disturbance fields must be finite")
        if not self.t_start < self.t_end:
            raise ScenarioError(f"disturbance needs t_start < t_end, got {self.t_start}, {self.t_end}")
        if self.kind is DisturbanceKind.BAND_NOISE and self.noise_cutoff <= 0:
            raise ScenarioError("band_noise needs noise_cutoff > 0")


class TimelineSegment(NamedTuple):
    t_start: float
    v_hope: float
    theta_hope: float


@dataclass(frozen=True)
class MeasurementModel:
    theta_noise_std: float = 0.002
    rate_noise_std: float = 0.01
    enabled: bool = True

    def __post_init__(self):
        for name in ("theta_noise_std", "rate_noise_std"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class Scenario:
    duration: float
    command_timeline: tuple[TimelineSegment, ...]
    disturbances: tuple[DisturbanceSpec, ...] = ()
    seed: int = 0
    params_override: Mapping[str, str] = field(default_factory=dict)
    control_override: Mapping[str, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "command_timeline", tuple(TimelineSegment(*s) for s in self.command_timeline))
        object.__setattr__(self, "disturbances", tuple(self.disturbances))
        object.__setattr__(self, "params_override", dict(self.params_override))
        object.__setattr__(self, "control_override", dict(self.control_override))
        self.validate()

    def validate(self) -> None:
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ScenarioError(f"duration must be > 0, got {self.duration!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= _SEED_MASK:
            raise ScenarioError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        timeline = self.command_timeline
        if not timeline:
            raise ScenarioError("command timeline is empty")
        if timeline[0].t_start != 0:
            raise ScenarioError("command timeline must start at t=0")
        for seg in timeline:
            if not all(math.isfinite(x) for x in seg):
                raise ScenarioError(f"non-finite timeline segment {seg}")
        for a, b in zip(timeline, timeline[1:]):
            if not b.t_start > a.t_start:
                raise ScenarioError(f"timeline segments out of order at t={b.t_start}")
        if timeline[-1].t_start >= self.duration:
            raise ScenarioError("timeline segment starts at or after the end of the run")
        for d in self.disturbances:
            if d.t_end > self.duration:
                raise ScenarioError(f"disturbance ends at {d.t_end} after duration {self.duration}")

    @property
    def n_ticks(self) -> int:
        return round(self.duration / CONTROL_PERIOD)

    def setpoints_at(self, t: float) -> Setpoints:
        current = self.command_timeline[0]
        for seg in self.command_timeline:
            # tolerance keeps k*period ticks aligned with decimal segment starts
            if seg.t_start <= t + 1e-9:
                current = seg
            else:
                break
        return Setpoints(current.v_hope, current.theta_hope)


class TelemetryRecord(NamedTuple):
    t: float
    v: float
    theta: float
    theta_dot: float
    beta: float
    beta_cmd: float
    omega_w: float
    u_gamma: float
    v_hope: float
    theta_hope: float
    ff_saturated: float


class Termination(str, Enum):
    COMPLETED = "completed"
    CAPSIZED = "capsized"


@dataclass
class Trajectory:
    records: list[TelemetryRecord]
    termination: Termination = Termination.COMPLETED

    @property
    def capsized(self) -> bool:
        return self.termination is Termination.CAPSIZED

    def column(self, name: str) -> np.ndarray:
        idx = TelemetryRecord._fields.index(name)
        return np.array([r[idx] for r in self.records])


def _generator(seed: int, stream: int) -> np.random.Generator:
    # counter-based: the k-th draw depends only on (seed, stream, k)
    return np.random.Generator(np.random.Philox(key=[seed & _SEED_MASK, stream]))


def band_noise_series(seed: int, index: int, spec: DisturbanceSpec, n_steps: int, dt: float = PHYSICS_DT) -> np.ndarray:
    """Band-limited noise torque for physics steps ``0..n_steps-1``.

    White draw ``k`` belongs to physics step ``k`` regardless of the window,
    and the filter starts from rest at ``t_start``. Zero outside the window.
    """
    out = np.zeros(n_steps)
    if spec.magnitude == 0:
        return out
    white = _generator(seed, index).standard_normal(n_steps) * spec.magnitude
    a = 1.0 - math.exp(-2.0 * math.pi * spec.noise_cutoff * dt)
    k0 = max(0, math.ceil(spec.t_start / dt - 1e-9))
    k1 = min(n_steps, math.ceil(spec.t_end / dt - 1e-9))
    y = 0.0
    for k in range(k0, k1):
        y += a * (white[k] - y)
        out[k] = y
    return out


def band_noise_sample(seed: int, index: int, spec: DisturbanceSpec, t: float, dt: float = PHYSICS_DT) -> float:
    """Band-noise torque at physics step ``round(t / dt)``; reproducible without run state."""
    k = round(t / dt)
    if k < 0 or not spec.t_start <= t < spec.t_end:
        return 0.0
    return float(band_noise_series(seed, index, spec, k + 1, dt)[k])


def disturbance_series(scenario: Scenario, n_steps: int, dt: float = PHYSICS_DT) -> np.ndarray:
    """Total external roll torque for each physics step."""
    total = np.zeros(n_steps)
    for index, spec in enumerate(scenario.disturbances):
        if spec.kind is DisturbanceKind.BAND_NOISE:
            total += band_noise_series(scenario.seed, index, spec, n_steps, dt)
            continue
        k0 = max(0, math.ceil(spec.t_start / dt - 1e-9))
        if spec.kind is DisturbanceKind.IMPULSE:
            if k0 < n_steps:
                total[k0] += spec.magnitude / dt
        else:
            k1 = min(n_steps, math.ceil(spec.t_end / dt - 1e-9))
            total[k0:k1] += spec.magnitude
    return total


def sensor_noise(seed: int, n_ticks: int, model: MeasurementModel) -> tuple[np.ndarray, np.ndarray]:
    if not model.enabled:
        return np.zeros(n_ticks), np.zeros(n_ticks)
    draws = _generator(seed, _SENSOR_STREAM).standard_normal((n_ticks, 2))
    return draws[:, 0] * model.theta_noise_std, draws[:, 1] * model.rate_noise_std


def run(
    scenario: Scenario,
    params: PlantParams,
    cfg: ControlConfig,
    measurement: MeasurementModel | None = None,
    initial_state: PlantState | None = None,
    on_record=None,
) -> Trajectory:
    """Simulate ``scenario`` and return one telemetry record per control tick.

    ``params`` and ``cfg`` are used as given; scenario overrides are applied
    by the caller (see ``rotunsim.config.resolve``). ``on_record`` is called
    with each record as it is produced (live telemetry).
    """
    scenario.validate()
    measurement = measurement or MeasurementModel()
    n_ticks = scenario.n_ticks
    d_ext = disturbance_series(scenario, n_ticks * SUBSTEPS).tolist()
    theta_noise, rate_noise = sensor_noise(scenario.seed, n_ticks + 1, measurement)

    state = initial_state or PlantState()
    ctl = ControllerState()
    records: list[TelemetryRecord] = []
    termination = Termination.COMPLETED
    for k in range(n_ticks + 1):
        t = k * CONTROL_PERIOD
        sp = scenario.setpoints_at(t)
        if measurement.enabled:
            meas = Measurement(state.theta + theta_noise[k], state.theta_dot + rate_noise[k], state.v)
        else:
            meas = Measurement(state.theta, state.theta_dot, state.v)
        cmd = control.controller_step(meas, sp, CONTROL_PERIOD, ctl, cfg, params, t=t)
        rec = TelemetryRecord(
            t, state.v, state.theta, state.theta_dot, state.beta, cmd.inputs.beta_cmd,
            state.omega_w, cmd.inputs.u_gamma, sp.v_hope, sp.theta_hope, float(cmd.ff_saturated),
        )
        records.append(rec)
        if on_record is not None:
            on_record(rec)
        if k == n_ticks:
            break
        held = cmd.inputs
        try:
            for j in range(SUBSTEPS):
                inputs = PlantInputs(held.v_cmd, held.beta_cmd, held.u_gamma, d_ext[k * SUBSTEPS + j])
                state = step_rk4(state, inputs, params, PHYSICS_DT)
        except CapsizeError:
            termination = Termination.CAPSIZED
            break
    return Trajectory(records, termination)
