"""Decoupled roll controller: pendulum feedforward + segmented PI, wheel segmented PD.

The pendulum channel drives the roll angle to its target, the momentum
wheel channel only damps roll rate. A no-wheel baseline folds a roll-rate
damping term into the pendulum command instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .plant import PlantInputs, PlantParams


class Mode(str, Enum):
    WITH_WHEEL = "with_wheel"
    BASELINE = "baseline_no_wheel"


@dataclass(frozen=True)
class GainSegment:
    threshold: float
    kp: float
    ki_or_kd: float


@dataclass(frozen=True)
class GainSchedule:
    segments: tuple[GainSegment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("gain schedule needs at least one segment")
        for seg in segs:
            for name in ("kp", "ki_or_kd"):
                value = getattr(seg, name)
                if not math.isfinite(value) or value < 0:
                    raise ValueError(f"gain {name} must be finite and >= 0, got {value!r}")
            if math.isnan(seg.threshold) or seg.threshold < 0:
                raise ValueError(f"segment threshold must be >= 0, got {seg.threshold!r}")
        for a, b in zip(segs, segs[1:]):
            if not b.threshold > a.threshold:
                raise ValueError("segment thresholds must be strictly increasing")
        if segs[-1].threshold != math.inf:
            raise ValueError("last segment threshold must be +inf")

    @classmethod
    def of(cls, *rows: tuple[float, float, float]) -> "GainSchedule":
        return cls(tuple(GainSegment(*row) for row in rows))

    def select(self, magnitude: float) -> GainSegment:
        """First segment whose threshold bounds ``magnitude``; ties go to the lower band."""
        for seg in self.segments:
            if magnitude <= seg.threshold:
                return seg
        return self.segments[-1]


def default_pendulum_schedule() -> GainSchedule:
    return GainSchedule.of((0.1, 1.2, 0.4), (math.inf, 0.7, 0.15))


def default_wheel_schedule() -> GainSchedule:
    return GainSchedule.of((0.3, 45.0, 4.0), (math.inf, 70.0, 6.0))


@dataclass(frozen=True)
class ControlConfig:
    pendulum_schedule: GainSchedule = field(default_factory=default_pendulum_schedule)
    wheel_schedule: GainSchedule = field(default_factory=default_wheel_schedule)
    integral_clamp: float = 0.5
    rate_filter_alpha: float = 0.2
    mode: Mode = Mode.WITH_WHEEL
    baseline_kd: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (math.isfinite(self.integral_clamp) and self.integral_clamp > 0):
            raise ValueError(f"integral_clamp must be > 0, got {self.integral_clamp!r}")
        if not 0.0 < self.rate_filter_alpha <= 1.0:
            raise ValueError(f"rate_filter_alpha must be in (0, 1], got {self.rate_filter_alpha!r}")
        if not (math.isfinite(self.baseline_kd) and self.baseline_kd >= 0):
            raise ValueError(f"baseline_kd must be finite and >= 0, got {self.baseline_kd!r}")


@dataclass
class ControllerState:
    pi_integral: float = 0.0
    # None until the first roll-rate sample primes the filter
    rate_filter: float | None = None
    last_update_time: float = 0.0


class Setpoints(NamedTuple):
    v_hope: float = 0.0
    theta_hope: float = 0.0


class Measurement(NamedTuple):
    theta: float
    theta_dot: float
    v: float


class Command(NamedTuple):
    inputs: PlantInputs
    ff_saturated: bool


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"non-finite {name}={value!r}")


def feedforward(theta_hope: float, v: float, params: PlantParams) -> tuple[float, bool]:
    """Steady-turn pendulum angle, and whether the pendulum cannot deliver it.

    A feasible turn returns the exact balance angle even beyond ``beta_max``
    (the servo clamps the total command). An infeasible one (asin argument
    past 1) is saturated at the asin limit and then at ``±beta_max``.
    """
    _require_finite(theta_hope=theta_hope, v=v)
    ratio = params.M * v * v * math.tan(theta_hope) / (params.m * params.g * params.l)
    infeasible = abs(ratio) > 1.0
    beta = theta_hope + math.asin(max(-1.0, min(1.0, ratio)))
    saturated = infeasible or abs(beta) > params.beta_max
    if infeasible and abs(beta) > params.beta_max:
        beta = math.copysign(params.beta_max, beta)
    return beta, saturated


def feedforward_beta(theta_hope: float, v: float, params: PlantParams) -> float:
    return feedforward(theta_hope, v, params)[0]


def pendulum_pi_step(theta_err: float, dt: float, state: ControllerState, cfg: ControlConfig) -> float:
    """Segmented PI correction to the pendulum angle, in rad.

    The integrator is shared by all bands and clamped to ``±integral_clamp``.
    """
    _require_finite(theta_err=theta_err, dt=dt)
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    seg = cfg.pendulum_schedule.select(abs(theta_err))
    clamp = cfg.integral_clamp
    state.pi_integral = max(-clamp, min(clamp, state.pi_integral + theta_err * dt))
    return seg.kp * theta_err + seg.ki_or_kd * state.pi_integral


def wheel_pd_step(
    theta_dot: float,
    dt: float,
    state: ControllerState,
    cfg: ControlConfig,
    u_gamma_max: float = PlantParams.u_gamma_max,
) -> float:
    """Segmented PD on roll rate toward zero; returns the roll torque demanded of the wheel.

    The derivative acts on an exponentially filtered rate whose memory is
    seeded with the first sample, so the first call has no derivative kick.
    """
    _require_finite(theta_dot=theta_dot, dt=dt)
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    error = -theta_dot
    seg = cfg.wheel_schedule.select(abs(error))
    previous = theta_dot if state.rate_filter is None else state.rate_filter
    a = cfg.rate_filter_alpha
    filtered = a * theta_dot + (1.0 - a) * previous
    state.rate_filter = filtered
    d_error = -(filtered - previous) / dt
    torque = seg.kp * error + seg.ki_or_kd * d_error
    return max(-u_gamma_max, min(u_gamma_max, torque))


def controller_step(
    measured: Measurement,
    setpoints: Setpoints,
    dt: float,
    state: ControllerState,
    cfg: ControlConfig,
    params: PlantParams,
    t: float | None = None,
) -> Command:
    """One control tick: map measurements and setpoints to plant commands.

    The wheel channel's roll-torque demand is sent to the motor with the
    opposite sign, since the frame feels the reaction of the motor torque.
    """
    theta, theta_dot, v = measured
    _require_finite(theta=theta, theta_dot=theta_dot, v=v)
    beta_ff, saturated = feedforward(setpoints.theta_hope, v, params)
    beta_cmd = beta_ff + pendulum_pi_step(setpoints.theta_hope - theta, dt, state, cfg)
    if cfg.mode is Mode.WITH_WHEEL:
        u_gamma = -wheel_pd_step(theta_dot, dt, state, cfg, params.u_gamma_max)
    else:
        beta_cmd -= cfg.baseline_kd * theta_dot
        u_gamma = 0.0
    if t is not None:
        state.last_update_time = t
    # avoid emitting -0.0 for exactly-zero demands
    u_gamma = u_gamma + 0.0
    return Command(PlantInputs(setpoints.v_hope, beta_cmd, u_gamma, 0.0), saturated)

