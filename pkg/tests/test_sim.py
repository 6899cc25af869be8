import math

import numpy as np
import pytest

from rotunsim import sim
from rotunsim.control import ControlConfig
from rotunsim.plant import PlantParams, PlantState
from rotunsim.sim import (
    DisturbanceKind,
    DisturbanceSpec,
    MeasurementModel,
    Scenario,
    ScenarioError,
    TimelineSegment,
    band_noise_sample,
    band_noise_series,
    disturbance_series,
    run,
)

P = PlantParams()
CFG = ControlConfig()
QUIET = MeasurementModel(enabled=False)


def still(duration=1.0, **kw):
    return Scenario(duration, [TimelineSegment(0.0, 0.0, 0.0)], **kw)


def test_zero_run_has_one_record_per_tick_plus_one():
    traj = run(still(1.0), P, CFG, QUIET)
    assert len(traj.records) == 101
    assert not traj.capsized
    assert all(x == 0.0 for rec in traj.records for x in rec[1:])


def test_timestamps_are_exact_multiples_of_the_period():
    traj = run(still(3.0), P, CFG)
    assert [r.t for r in traj.records] == [k * 0.01 for k in range(301)]


def test_same_seed_is_bit_identical():
    band = DisturbanceSpec(DisturbanceKind.BAND_NOISE, 0.0, 2.0, 80.0, 3.0)
    sc = Scenario(2.0, [TimelineSegment(0, 2.0, 0), TimelineSegment(1, 2.0, 0.1)], [band], seed=7)
    assert run(sc, P, CFG).records == run(sc, P, CFG).records
    other = Scenario(2.0, sc.command_timeline, [band], seed=8)
    assert run(other, P, CFG).records != run(sc, P, CFG).records


def test_impulse_jumps_roll_rate_by_impulse_over_inertia():
    # at standstill only gravity restores and the kick capsizes, so cruise at 3 m/s
    kick = DisturbanceSpec(DisturbanceKind.IMPULSE, 1.0, 1.01, 80.0)
    sc = Scenario(3.0, [TimelineSegment(0.0, 3.0, 0.0)], [kick])
    traj = run(sc, P, CFG, QUIET, initial_state=PlantState(v=3.0))
    assert not traj.capsized
    rate = traj.column("theta_dot")
    assert rate[100] == 0.0
    assert rate[101] == pytest.approx(80.0 / P.J_roll, rel=0.02)
    assert np.max(np.abs(rate[200:])) < 0.75 * rate[101]
    assert np.max(np.abs(rate[250:])) < 0.5 * rate[101]


def test_disturbance_series_layout():
    sc = still(
        1.0,
        disturbances=[
            DisturbanceSpec(DisturbanceKind.IMPULSE, 0.5, 0.51, 2.0),
            DisturbanceSpec(DisturbanceKind.CONSTANT, 0.2, 0.3, 1.5),
        ],
    )
    d = disturbance_series(sc, 1000)
    assert d[500] == pytest.approx(2.0 / 0.001)
    assert d[200:300].tolist() == [1.5] * 100
    assert d[199] == 0.0 and d[300] == 0.0
    assert np.sum(d) * 0.001 == pytest.approx(2.0 + 0.15)


def test_band_noise_zero_outside_window_and_for_zero_magnitude():
    spec = DisturbanceSpec(DisturbanceKind.BAND_NOISE, 1.0, 2.0, 10.0, 5.0)
    series = band_noise_series(3, 0, spec, 3000)
    assert not series[:1000].any() and not series[2000:].any()
    assert series[1000:2000].any()
    assert band_noise_sample(3, 0, spec, 0.5) == 0.0
    assert band_noise_sample(3, 0, spec, 2.5) == 0.0
    assert band_noise_sample(3, 0, spec, 1.5) == series[1500]
    silent = DisturbanceSpec(DisturbanceKind.BAND_NOISE, 0.0, 2.0, 0.0, 5.0)
    assert not band_noise_series(3, 0, silent, 2000).any()


@pytest.mark.parametrize("seed", range(5))
def test_band_noise_mean_is_near_zero(seed):
    n = 100_000
    spec = DisturbanceSpec(DisturbanceKind.BAND_NOISE, 0.0, n * 0.001, 4.0, 20.0)
    series = band_noise_series(seed, 0, spec, n)
    assert abs(series.mean()) < 3 * 4.0 / math.sqrt(n)


def test_streams_are_independent_per_disturbance():
    spec = DisturbanceSpec(DisturbanceKind.BAND_NOISE, 0.0, 1.0, 1.0, 5.0)
    assert not np.array_equal(band_noise_series(1, 0, spec, 1000), band_noise_series(1, 1, spec, 1000))


def test_noise_off_measures_true_state(monkeypatch):
    seen = []
    real = sim.control.controller_step

    def spy(measured, *args, **kw):
        seen.append(measured)
        return real(measured, *args, **kw)

    monkeypatch.setattr(sim.control, "controller_step", spy)
    sc = Scenario(1.0, [TimelineSegment(0, 1.0, 0.0), TimelineSegment(0.2, 1.0, 0.2)])
    traj = run(sc, P, CFG, QUIET)
    assert [(m.theta, m.theta_dot, m.v) for m in seen] == [(r.theta, r.theta_dot, r.v) for r in traj.records]


def test_inputs_are_held_between_ticks(monkeypatch):
    calls = []
    real = sim.step_rk4

    def spy(state, inputs, params, dt):
        calls.append(inputs)
        return real(state, inputs, params, dt)

    monkeypatch.setattr(sim, "step_rk4", spy)
    sc = Scenario(0.5, [TimelineSegment(0, 2.0, 0.0), TimelineSegment(0.1, 2.0, 0.2)], seed=4)
    run(sc, P, CFG)
    assert len(calls) == 50 * sim.SUBSTEPS
    for k in range(50):
        block = {c[:3] for c in calls[k * sim.SUBSTEPS:(k + 1) * sim.SUBSTEPS]}
        assert len(block) == 1


def test_capsize_terminates_the_run():
    shove = DisturbanceSpec(DisturbanceKind.CONSTANT, 0.0, 2.0, 500.0)
    traj = run(still(2.0, disturbances=[shove]), P, CFG, QUIET)
    assert traj.capsized
    assert len(traj.records) < 201
    assert all(abs(r.theta) < P.theta_capsize for r in traj.records)


def test_initial_state_and_callback():
    seen = []
    traj = run(still(0.1), P, CFG, QUIET, initial_state=PlantState(theta=0.05), on_record=seen.append)
    assert seen == traj.records
    assert traj.records[0].theta == 0.05


def test_setpoints_follow_the_timeline():
    sc = Scenario(9.0, [TimelineSegment(0, 1, 0), TimelineSegment(3, 1, 0.26), TimelineSegment(6, 1, 0)])
    assert sc.setpoints_at(2.99).theta_hope == 0
    assert sc.setpoints_at(3.0).theta_hope == 0.26
    # 300 * 0.01 is 3.0000000000000004 in binary; still the step segment
    assert sc.setpoints_at(600 * 0.01).theta_hope == 0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"duration": 0.0, "command_timeline": [TimelineSegment(0, 0, 0)]},
        {"duration": 1.0, "command_timeline": []},
        {"duration": 1.0, "command_timeline": [TimelineSegment(0.5, 0, 0)]},
        {"duration": 1.0, "command_timeline": [TimelineSegment(0, 0, 0), TimelineSegment(0.6, 0, 0), TimelineSegment(0.3, 0, 0)]},
        {"duration": 1.0, "command_timeline": [TimelineSegment(0, 0, 0), TimelineSegment(1.0, 0, 0)]},
        {"duration": 1.0, "command_timeline": [TimelineSegment(0, 0, 0)], "seed": -1},
        {
            "duration": 1.0,
            "command_timeline": [TimelineSegment(0, 0, 0)],
            "disturbances": [DisturbanceSpec(DisturbanceKind.CONSTANT, 0.0, 2.0, 1.0)],
        },
    ],
)
def test_invalid_scenarios_rejected(kwargs):
    with pytest.raises(ScenarioError):
        Scenario(**kwargs)


def test_invalid_disturbances_rejected():
    with pytest.raises(ScenarioError):
        DisturbanceSpec(DisturbanceKind.CONSTANT, 1.0, 1.0, 1.0)
    with pytest.raises(ScenarioError):
        DisturbanceSpec(DisturbanceKind.BAND_NOISE, 0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        DisturbanceSpec("earthquake", 0.0, 1.0, 1.0)
