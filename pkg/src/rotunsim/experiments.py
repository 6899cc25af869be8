"""Canned scenarios E1-E4, step-response metrics and the wheel/no-wheel comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .control import ControlConfig, Mode
from .plant import PlantParams
from .sim import (
    DisturbanceKind,
    DisturbanceSpec,
    MeasurementModel,
    Scenario,
    TimelineSegment,
    Trajectory,
    run,
)

STEP_THETA = 0.26  # 15 degrees
E1_SPEEDS = (1.0, 2.0, 3.0)
E1_STEP_WINDOW = (3.0, 6.0)
E1_POST_WINDOW = (6.0, 9.0)

E2_SPEED = 3.5
E2_DURATION = 10.0
E2_SURFACE_START = 2.0  # robot rolls onto the surface once near speed
SLOPE_ANGLE = math.radians(10.0)
# fraction of the along-slope gravity moment felt in roll when the heading is
# 30 degrees off the fall line
K_SLOPE = math.sin(math.radians(30.0))
# (white-torque std N·m, cutoff Hz) per surface
TERRAINS = {
    "grass": (250.0, 2.0),
    "track": (100.0, 2.0),
    "slope": (150.0, 2.0),
    "turf": (300.0, 3.0),
}

E3_SPEED = 4.0
E3_DURATION = 8.0
E3_IMPULSE_TIME = 3.0
E3_TARGET_PEAK = 0.4
E3_PEAK_TOL = 0.02
E3_SETTLE_BAND = 0.1
E3_SETTLE_TIME = 2.0

E4_TOP_SPEED = 10.0
E4_RAMP_END = 10.0
E4_DURATION = 35.0
E4_HOLD = 20.0
E4_NOISE = (150.0, 2.0)


@dataclass(frozen=True)
class Metrics:
    """Step-response summary.

    Times are measured from the start of the metric window. ``rise_time_90``
    and ``settling_time`` are NaN when the response never reaches 90% of the
    step, or is still outside the band at the end of the window.
    """

    overshoot_frac: float
    rise_time_90: float
    settling_time: float
    peak_roll: float
    rms_roll_err: float
    capsized: bool


@dataclass(frozen=True)
class ComparisonRow:
    speed: float
    metrics_with_wheel: Metrics
    metrics_baseline: Metrics


def settle_band(target: float) -> float:
    return 0.1 * abs(target) if target != 0 else 0.02


def _window_mask(t: np.ndarray, window: tuple[float, float | None]) -> np.ndarray:
    start, end = window
    # half-open on the right; 1e-9 absorbs k*period rounding
    mask = t >= start - 1e-9
    if end is not None:
        mask &= t < end - 1e-9
    return mask


def compute_metrics(
    traj: Trajectory,
    target_theta: float,
    window: tuple[float, float | None] = (0.0, None),
    rms_window: tuple[float, float | None] | None = None,
) -> Metrics:
    if not traj.records:
        raise ValueError("cannot compute metrics of an empty trajectory")
    t = traj.column("t")
    theta = traj.column("theta")
    mask = _window_mask(t, window)
    if not mask.any():
        raise ValueError(f"metric window {window} holds no records")
    tw, yw = t[mask], theta[mask]
    t0 = window[0]

    peak_roll = float(np.max(np.abs(yw)))
    if target_theta != 0:
        sign = math.copysign(1.0, target_theta)
        peak = float(np.max(sign * yw))
        overshoot = max(0.0, (peak - abs(target_theta)) / abs(target_theta))
    else:
        overshoot = 0.0

    y0 = float(yw[0])
    span = target_theta - y0
    if span == 0:
        rise = 0.0
    else:
        reached = np.nonzero((yw - y0) / span >= 0.9)[0]
        rise = float(tw[reached[0]] - t0) if reached.size else math.nan

    outside = np.nonzero(np.abs(yw - target_theta) > settle_band(target_theta))[0]
    if outside.size == 0:
        settling = 0.0
    elif outside[-1] + 1 < tw.size:
        settling = float(tw[outside[-1] + 1] - t0)
    else:
        settling = math.nan

    rmask = _window_mask(t, rms_window) if rms_window is not None else mask
    err = theta[rmask] - traj.column("theta_hope")[rmask]
    rms = float(np.sqrt(np.mean(err ** 2))) if err.size else math.nan

    return Metrics(overshoot, rise, settling, peak_roll, rms, traj.capsized)


def _straight(speed: float) -> list[TimelineSegment]:
    return [TimelineSegment(0.0, speed, 0.0)]


def scenario_e1(speed: float, seed: int = 0) -> Scenario:
    """Straight run at ``speed`` with a 0.26 rad roll step held from 3 s to 6 s."""
    timeline = [
        TimelineSegment(0.0, speed, 0.0),
        TimelineSegment(E1_STEP_WINDOW[0], speed, STEP_THETA),
        TimelineSegment(E1_STEP_WINDOW[1], speed, 0.0),
    ]
    return Scenario(9.0, timeline, seed=seed, name=f"e1_v{speed:g}")


def scenario_e2(seed: int = 0, params: PlantParams | None = None) -> dict[str, Scenario]:
    """One straight 3.5 m/s run per surface; terrain enters as roll-torque noise."""
    out = {}
    for name, (magnitude, cutoff) in TERRAINS.items():
        dist = [DisturbanceSpec(DisturbanceKind.BAND_NOISE, E2_SURFACE_START, E2_DURATION, magnitude, cutoff)]
        if name == "slope":
            p = params or PlantParams()
            lateral = -p.M * p.g * p.R * math.sin(SLOPE_ANGLE) * K_SLOPE
            dist.append(DisturbanceSpec(DisturbanceKind.CONSTANT, E2_SURFACE_START, E2_DURATION, lateral))
        out[name] = Scenario(E2_DURATION, _straight(E2_SPEED), dist, seed=seed, name=f"e2_{name}")
    return out


def scenario_e3(impulse: float = 66.0, seed: int = 0) -> Scenario:
    """Straight 4 m/s run with a lateral roll impulse (N·m·s) at 3 s.

    The default impulse is only a starting point; ``calibrate_e3`` tunes it
    to the observed 0.4 rad peak.
    """
    dist = [DisturbanceSpec(DisturbanceKind.IMPULSE, E3_IMPULSE_TIME, E3_IMPULSE_TIME + 0.01, impulse)]
    return Scenario(E3_DURATION, _straight(E3_SPEED), dist, seed=seed, name="e3")


def scenario_e4(seed: int = 0) -> Scenario:
    """Ramp to 10 m/s by 10 s in 0.5 m/s stairs, then hold to 35 s under mild terrain noise."""
    n = 20
    timeline = [TimelineSegment(k * E4_RAMP_END / n, (k + 1) * E4_TOP_SPEED / n, 0.0) for k in range(n)]
    magnitude, cutoff = E4_NOISE
    dist = [DisturbanceSpec(DisturbanceKind.BAND_NOISE, 0.0, E4_DURATION, magnitude, cutoff)]
    return Scenario(E4_DURATION, timeline, dist, seed=seed, name="e4")


@dataclass(frozen=True)
class E3Calibration:
    impulse: float
    peak: float
    runs: int
    trajectory: Trajectory


def _post_impulse_peak(traj: Trajectory) -> float:
    t = traj.column("t")
    return float(np.max(np.abs(traj.column("theta")[t >= E3_IMPULSE_TIME])))


def calibrate_e3(
    params: PlantParams | None = None,
    cfg: ControlConfig | None = None,
    measurement: MeasurementModel | None = None,
    seed: int = 0,
    target: float = E3_TARGET_PEAK,
    tol: float = E3_PEAK_TOL,
    max_runs: int = 30,
) -> E3Calibration:
    """Bisect the E3 impulse until the post-impulse roll peak is within ``tol`` of ``target``."""
    params = params or PlantParams()
    cfg = cfg or ControlConfig()
    runs = 0

    def trial(impulse):
        nonlocal runs
        runs += 1
        traj = run(scenario_e3(impulse, seed), params, cfg, measurement)
        return traj, _post_impulse_peak(traj)

    # first guess from impulse-momentum and the linearised roll frequency
    stiffness = params.m * params.g * params.l + params.M * E3_SPEED ** 2
    guess = target * math.sqrt(stiffness * params.J_roll)
    lo, hi = 0.0, guess
    traj, peak = trial(hi)
    while peak < target and runs < max_runs:
        lo, hi = hi, 2.0 * hi
        traj, peak = trial(hi)
    impulse = hi
    while abs(peak - target) >= tol and runs < max_runs:
        impulse = 0.5 * (lo + hi)
        traj, peak = trial(impulse)
        if traj.capsized or peak > target:
            hi = impulse
        else:
            lo = impulse
    if abs(peak - target) >= tol:
        raise RuntimeError(f"E3 calibration did not converge in {max_runs} runs (peak {peak:.3f})")
    return E3Calibration(impulse, peak, runs, traj)


def e3_settle_time(traj: Trajectory, band: float = E3_SETTLE_BAND) -> float:
    """Time after the impulse from which ``|theta|`` stays below ``band``; NaN if never."""
    t = traj.column("t")
    theta = np.abs(traj.column("theta"))
    after = t >= E3_IMPULSE_TIME
    idx = np.nonzero(after & (theta >= band))[0]
    if idx.size == 0:
        return 0.0
    if idx[-1] + 1 >= t.size:
        return math.nan
    return float(t[idx[-1] + 1] - E3_IMPULSE_TIME)


def e1_metrics(traj: Trajectory) -> Metrics:
    return compute_metrics(traj, STEP_THETA, E1_STEP_WINDOW, rms_window=E1_POST_WINDOW)


def compare_stability(
    params: PlantParams | None = None,
    cfg: ControlConfig | None = None,
    measurement: MeasurementModel | None = None,
    seed: int = 0,
    speeds=E1_SPEEDS,
) -> list[ComparisonRow]:
    """Run E1 at each speed with and without the wheel; only ``cfg.mode`` differs."""
    params = params or PlantParams()
    cfg = cfg or ControlConfig()
    rows = []
    for speed in speeds:
        scenario = scenario_e1(speed, seed)
        with_wheel = run(scenario, params, replace(cfg, mode=Mode.WITH_WHEEL), measurement)
        baseline = run(scenario, params, replace(cfg, mode=Mode.BASELINE), measurement)
        rows.append(ComparisonRow(speed, e1_metrics(with_wheel), e1_metrics(baseline)))
    return rows
