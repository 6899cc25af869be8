"""Numerical invariant checks of the plant: momentum, energy, integrator order, equilibrium."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Callable

from .control import feedforward_beta
from .plant import (
    PlantInputs,
    PlantParams,
    PlantState,
    equilibrium_beta,
    roll_energy,
    roll_momentum,
    step_rk4,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    passed: bool
    detail: str


def momentum_drift(duration: float = 10.0, dt: float = 0.001, seed: int = 1) -> float:
    """Largest per-step change of total roll momentum under a random wheel torque profile.

    Gravity, speed and roll damping are off so only the internal wheel torque
    acts. The profile is a train of random +u/-u doublets (10 ms each) so the
    free-floating roll angle stays inside the capsize envelope.
    """
    params = replace(PlantParams(), g=0.0, c_theta=0.0)
    rng = random.Random(seed)
    state = PlantState()
    worst = 0.0
    h = roll_momentum(state, params)
    u = 0.0
    for k in range(round(duration / dt)):
        if k % 20 == 0:
            u = rng.uniform(-params.u_gamma_max, params.u_gamma_max)
        elif k % 20 == 10:
            u = -u
        state = step_rk4(state, PlantInputs(u_gamma=u), params, dt)
        h_new = roll_momentum(state, params)
        worst = max(worst, abs(h_new - h))
        h = h_new
    return worst


def energy_drift(duration: float = 10.0, dt: float = 0.001, theta0: float = 0.3) -> float:
    """Relative roll-energy drift of the undamped free oscillation with the pendulum frozen."""
    params = replace(PlantParams(), c_theta=0.0, k_ps=0.0, k_ds=0.0)
    state = PlantState(theta=theta0)
    e0 = roll_energy(state, params)
    worst = 0.0
    for _ in range(round(duration / dt)):
        state = step_rk4(state, PlantInputs(), params, dt)
        worst = max(worst, abs(roll_energy(state, params) - e0))
    return worst / abs(e0)


def free_pendulum_params(k_ps: float) -> PlantParams:
    # J_roll huge freezes theta; k_ds=0 leaves beta'' = -k_ps * beta
    return replace(PlantParams(), J_roll=1e12, k_ps=k_ps, k_ds=0.0)


def integrate_free_pendulum(params: PlantParams, beta0: float, duration: float, dt: float) -> PlantState:
    state = PlantState(beta=beta0)
    for _ in range(round(duration / dt)):
        state = step_rk4(state, PlantInputs(), params, dt)
    return state


def integrator_order_ratio(
    k_ps: float = 2500.0,
    duration: float = 0.2,
    beta0: float = 0.5,
    dt: float = 1e-3,
    dt_ref: float = 1e-6,
) -> float:
    """Endpoint error ratio e(dt) / e(dt/2) against a fine-step reference (≈16 for RK4)."""
    params = free_pendulum_params(k_ps)
    ref = integrate_free_pendulum(params, beta0, duration, dt_ref)
    omega = math.sqrt(k_ps)

    def err(h: float) -> float:
        s = integrate_free_pendulum(params, beta0, duration, h)
        return math.hypot(s.beta - ref.beta, (s.beta_dot - ref.beta_dot) / omega)

    return err(dt) / err(0.5 * dt)


def equilibrium_gap(n_theta: int = 21, n_v: int = 13, max_ratio: float = 0.9) -> tuple[float, int]:
    """Largest feedforward/equilibrium disagreement over a (theta, v) grid, and the point count."""
    params = PlantParams()
    mgl = params.m * params.g * params.l
    worst, count = 0.0, 0
    for i in range(n_theta):
        theta = -0.4 + 0.8 * i / (n_theta - 1)
        for j in range(n_v):
            v = 2.0 * j / (n_v - 1)
            if abs(params.M * v * v * math.tan(theta) / mgl) > max_ratio:
                continue
            worst = max(worst, abs(feedforward_beta(theta, v, params) - equilibrium_beta(theta, v, params)))
            count += 1
    return worst, count


def run_checks(quick: bool = True) -> list[CheckResult]:
    """Run the invariant suite; ``quick`` shortens the fine-step order reference."""
    checks: list[tuple[str, Callable[[], float], Callable[[float], bool], str]] = [
        ("momentum", momentum_drift, lambda x: x < 1e-9, "max |dH| per 1 ms step < 1e-9"),
        ("energy", energy_drift, lambda x: x < 1e-6, "relative drift over 10 s < 1e-6"),
        (
            "order",
            (lambda: integrator_order_ratio(dt_ref=1e-5)) if quick else integrator_order_ratio,
            lambda x: 12.0 <= x <= 20.0,
            "error ratio when halving dt in [12, 20]",
        ),
        ("equilibrium", lambda: equilibrium_gap()[0], lambda x: x < 1e-6, "|feedforward - equilibrium| < 1e-6 rad"),
    ]
    results = []
    for name, fn, ok, detail in checks:
        value = fn()
        results.append(CheckResult(name, value, ok(value), detail))
    return results
