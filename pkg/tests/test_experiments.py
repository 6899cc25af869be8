import math

import numpy as np
import pytest

from rotunsim import experiments as ex
from rotunsim.control import ControlConfig, Mode
from rotunsim.plant import PlantParams
from rotunsim.sim import DisturbanceKind, TelemetryRecord, Termination, Trajectory

P = PlantParams()


def synthetic(theta_fn, duration=5.0, target=0.26, dt=0.01):
    t = dt * np.arange(round(duration / dt) + 1)
    theta = theta_fn(t)
    recs = [TelemetryRecord(ti, 0, th, 0, 0, 0, 0, 0, 0, target, 0) for ti, th in zip(t, theta)]
    return Trajectory(recs)


def test_e1_scenario_shape():
    sc = ex.scenario_e1(1.0)
    assert sc.duration == 9.0
    assert sc.setpoints_at(4.0).theta_hope == 0.26
    assert sc.setpoints_at(7.0).theta_hope == 0.0
    assert sc.setpoints_at(1.0) == (1.0, 0.0)
    assert sc.name == "e1_v1"


def test_e2_scenarios():
    scs = ex.scenario_e2()
    assert set(scs) == {"track", "grass", "turf", "slope"}
    for sc in scs.values():
        assert sc.duration == 10.0
        assert sc.setpoints_at(5.0) == (3.5, 0.0)
        assert sc.disturbances[0].kind is DisturbanceKind.BAND_NOISE
    slope = scs["slope"].disturbances[1]
    assert slope.kind is DisturbanceKind.CONSTANT
    assert slope.magnitude == pytest.approx(-P.M * P.g * P.R * math.sin(math.radians(10)) * 0.5)


def test_e3_and_e4_scenarios():
    e3 = ex.scenario_e3(50.0)
    assert e3.disturbances[0].kind is DisturbanceKind.IMPULSE
    assert e3.disturbances[0].t_start == 3.0 and e3.disturbances[0].magnitude == 50.0
    e4 = ex.scenario_e4()
    assert e4.duration - ex.E4_RAMP_END >= 20.0
    assert e4.setpoints_at(12.0) == (10.0, 0.0)
    v = [seg.v_hope for seg in e4.command_timeline]
    assert v == sorted(v) and v[-1] == 10.0


def test_metrics_of_perfect_tracking():
    m = ex.compute_metrics(synthetic(lambda t: np.full_like(t, 0.26)), 0.26)
    assert m.overshoot_frac == 0.0
    assert m.settling_time == 0.0
    assert m.rise_time_90 == 0.0
    assert m.rms_roll_err == 0.0


def test_overshoot_definition():
    m = ex.compute_metrics(synthetic(lambda t: 0.26 + 0.04 * np.sin(math.pi * t / 5.0)), 0.26)
    assert m.overshoot_frac == pytest.approx((0.30 - 0.26) / 0.26, abs=1e-4)
    assert m.overshoot_frac == pytest.approx(0.1538, abs=1e-4)


def brute_force_settling(fn, target, band, t_end, dt=1e-5):
    # last instant the error leaves the band, on a fine grid
    t = np.arange(0.0, t_end, dt)
    outside = np.abs(fn(t) - target) > band
    return t[np.nonzero(outside)[0][-1]] if outside.any() else 0.0


def test_settling_of_decaying_oscillation():
    def fn(t):
        return 0.26 + 0.1 * np.exp(-t) * np.cos(5 * t)

    m = ex.compute_metrics(synthetic(fn), 0.26)
    envelope = math.log(0.1 / 0.026)
    assert envelope == pytest.approx(1.35, abs=0.01)
    assert m.settling_time == pytest.approx(brute_force_settling(fn, 0.26, 0.026, 5.0), abs=0.011)
    assert m.settling_time <= envelope + 0.01
    assert m.settling_time == pytest.approx(1.35, abs=0.1)


def test_rise_time_and_window():
    def fn(t):
        return np.where(t < 1.0, 0.0, 0.26 * (1 - np.exp(-(t - 1.0) / 0.2)))

    m = ex.compute_metrics(synthetic(fn), 0.26, window=(1.0, None))
    assert m.rise_time_90 == pytest.approx(0.2 * math.log(10), abs=0.011)


def test_unsettled_response_reports_nan():
    m = ex.compute_metrics(synthetic(lambda t: np.zeros_like(t)), 0.26)
    assert math.isnan(m.settling_time) and math.isnan(m.rise_time_90)
    assert ex.settle_band(0.0) == 0.02 and ex.settle_band(-0.3) == pytest.approx(0.03)


def test_metrics_reject_empty_window():
    with pytest.raises(ValueError):
        ex.compute_metrics(synthetic(lambda t: t), 0.26, window=(10.0, 11.0))
    with pytest.raises(ValueError):
        ex.compute_metrics(Trajectory([]), 0.26)


def test_capsize_flag_passes_through():
    traj = synthetic(lambda t: t)
    traj.termination = Termination.CAPSIZED
    assert ex.compute_metrics(traj, 0.26).capsized


def test_compare_only_changes_the_mode(monkeypatch):
    calls = []
    real = ex.run

    def spy(scenario, params, cfg, measurement=None):
        calls.append((scenario, params, cfg.mode, cfg.wheel_schedule))
        return real(scenario, params, cfg, measurement)

    monkeypatch.setattr(ex, "run", spy)
    rows = ex.compare_stability(seed=5, speeds=(1.0,))
    assert [r.speed for r in rows] == [1.0]
    (sa, pa, ma, wa), (sb, pb, mb, wb) = calls
    assert sa == sb and sa.seed == 5 and pa == pb and wa == wb
    assert (ma, mb) == (Mode.WITH_WHEEL, Mode.BASELINE)


def test_e3_calibration_converges_within_budget():
    cal = ex.calibrate_e3()
    assert cal.runs <= 30
    assert abs(cal.peak - 0.4) < 0.02
    assert cal.trajectory.records[-1].t == pytest.approx(8.0)
    assert cal.impulse > 0 and not cal.trajectory.capsized


def test_e3_settle_time_definition():
    def fn(t):
        return np.where(t < 3.0, 0.0, 0.4 * np.exp(-(t - 3.0)))

    traj = synthetic(fn, duration=8.0, target=0.0)
    assert ex.e3_settle_time(traj) == pytest.approx(math.log(4.0), abs=0.011)
    assert math.isnan(ex.e3_settle_time(synthetic(lambda t: np.full_like(t, 0.2), duration=8.0)))
