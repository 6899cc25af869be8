"""Roll-plane dynamics of the pendulum/momentum-wheel spherical robot.

State is ``(theta, theta_dot, beta, beta_dot, omega_w, v)``:

* ``theta``   roll angle of the internal frame from vertical (positive leans
  toward the turn centre)
* ``beta``    heavy-pendulum angle relative to the main shaft, zero when
  perpendicular; ``beta == theta`` means the pendulum hangs plumb
* ``omega_w`` momentum-wheel spin rate
* ``v``       forward speed

The roll equation balances the pendulum's gravity moment against the
centripetal moment of a rolling sphere of radius ``R`` leaning at ``theta``
(turn radius ``R / tan(theta)``)::

    J_roll * theta_ddot = m g l sin(beta - theta) - M v^2 tan(theta)
                          - c_theta * theta_dot - u_wheel + d_ext

so the steady turn satisfies ``m g l sin(beta - theta) = M v^2 tan(theta)``.
The wheel motor torque acts on the wheel with ``+u`` and on the frame with
``-u``; the pendulum follows a second-order servo on its commanded angle and
forward speed is a first-order lag on the commanded speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

WHEEL_MASS = 9.8  # kg, cast-steel momentum wheel


class PlantError(Exception):
    """Base class for plant faults."""


class ParamError(PlantError, ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class CapsizeError(PlantError):
    """Roll angle left the recoverable envelope; the run must stop."""

    def __init__(self, state: "PlantState", limit: float):
        super().__init__(f"capsize: |theta|={abs(state.theta):.4f} rad >= {limit:.4f} rad")
        self.state = state


class InfeasibleLeanError(PlantError, ValueError):
    """No pendulum angle balances the requested lean at this speed."""


def disc_inertia(mass: float, diameter: float) -> float:
    return 0.5 * mass * (0.5 * diameter) ** 2


@dataclass(frozen=True)
class PlantParams:
    M: float = 160.0
    m: float = 73.4
    R: float = 0.40
    l: float = 0.27
    d_w: float = 0.42
    g: float = 9.81
    J_roll: float = 10.0
    J_w: float = disc_inertia(WHEEL_MASS, 0.42)
    c_theta: float = 2.0
    tau_v: float = 0.8
    k_ps: float = 60.0
    k_ds: float = 14.0
    beta_max: float = 1.2
    omega_w_max: float = 600.0
    u_gamma_max: float = 60.0
    v_max: float = 12.0
    theta_capsize: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParamError(f.name, f"must be a finite number, got {value!r}")
        strictly_positive = (
            "M", "m", "R", "l", "d_w", "J_roll", "J_w", "tau_v",
            "beta_max", "omega_w_max", "u_gamma_max", "v_max", "theta_capsize",
        )
        for name in strictly_positive:
            if getattr(self, name) <= 0:
                raise ParamError(name, f"must be > 0, got {getattr(self, name)!r}")
        for name in ("g", "c_theta", "k_ps", "k_ds"):
            if getattr(self, name) < 0:
                raise ParamError(name, f"must be >= 0, got {getattr(self, name)!r}")
        if self.m >= self.M:
            raise ParamError("m", "pendulum mass must be below total mass M")
        if self.l >= self.R:
            raise ParamError("l", "pendulum arm must fit inside the shell (l < R)")
        if self.theta_capsize >= math.pi / 2:
            raise ParamError("theta_capsize", "must be below pi/2")


class PlantState(NamedTuple):
    theta: float = 0.0
    theta_dot: float = 0.0
    beta: float = 0.0
    beta_dot: float = 0.0
    omega_w: float = 0.0
    v: float = 0.0


class PlantInputs(NamedTuple):
    v_cmd: float = 0.0
    beta_cmd: float = 0.0
    u_gamma: float = 0.0
    d_ext: float = 0.0


def _clip(x: float, limit: float) -> float:
    return limit if x > limit else (-limit if x < -limit else x)


def applied_wheel_torque(u_gamma: float, omega_w: float, params: PlantParams) -> float:
    """Motor torque after the torque clamp and the wheel-speed cut-off."""
    u = _clip(u_gamma, params.u_gamma_max)
    if abs(omega_w) >= params.omega_w_max and u * omega_w > 0:
        return 0.0
    return u


def _check_inputs(inputs: PlantInputs) -> None:
    for name, value in zip(PlantInputs._fields, inputs):
        if not math.isfinite(value):
            raise ValueError(f"non-finite plant input {name}={value!r}")


def _rates(x, inputs: PlantInputs, p: PlantParams):
    theta, theta_dot, beta, beta_dot, omega_w, v = x
    if not abs(theta) < p.theta_capsize:
        raise CapsizeError(PlantState(*x), p.theta_capsize)
    u = applied_wheel_torque(inputs.u_gamma, omega_w, p)
    theta_ddot = (
        p.m * p.g * p.l * math.sin(beta - theta)
        - p.M * v * v * math.tan(theta)
        - p.c_theta * theta_dot
        - u
        + inputs.d_ext
    ) / p.J_roll
    beta_ddot = p.k_ps * (_clip(inputs.beta_cmd, p.beta_max) - beta) - p.k_ds * beta_dot
    return (theta_dot, theta_ddot, beta_dot, beta_ddot, u / p.J_w, (_clip(inputs.v_cmd, p.v_max) - v) / p.tau_v)


def derivatives(state: PlantState, inputs: PlantInputs, params: PlantParams) -> PlantState:
    """Time derivative of every state field, returned as a ``PlantState``.

    Raises ``CapsizeError`` when ``|theta| >= theta_capsize`` and ``ValueError``
    on non-finite inputs.
    """
    _check_inputs(inputs)
    return PlantState(*_rates(state, inputs, params))


def step_rk4(state: PlantState, inputs: PlantInputs, params: PlantParams, dt: float) -> PlantState:
    """Advance one classical RK4 step with inputs held constant over ``dt``."""
    if not 0.0 < dt <= 0.01:
        raise ValueError(f"dt must be in (0, 0.01] s, got {dt!r}")
    _check_inputs(inputs)
    x0, x1, x2, x3, x4, x5 = state
    h = 0.5 * dt
    a0, a1, a2, a3, a4, a5 = _rates(state, inputs, params)
    b0, b1, b2, b3, b4, b5 = _rates(
        (x0 + h * a0, x1 + h * a1, x2 + h * a2, x3 + h * a3, x4 + h * a4, x5 + h * a5), inputs, params
    )
    c0, c1, c2, c3, c4, c5 = _rates(
        (x0 + h * b0, x1 + h * b1, x2 + h * b2, x3 + h * b3, x4 + h * b4, x5 + h * b5), inputs, params
    )
    d0, d1, d2, d3, d4, d5 = _rates(
        (x0 + dt * c0, x1 + dt * c1, x2 + dt * c2, x3 + dt * c3, x4 + dt * c4, x5 + dt * c5), inputs, params
    )
    s = dt / 6.0
    new = [
        x0 + s * (a0 + 2.0 * b0 + 2.0 * c0 + d0),
        x1 + s * (a1 + 2.0 * b1 + 2.0 * c1 + d1),
        x2 + s * (a2 + 2.0 * b2 + 2.0 * c2 + d2),
        x3 + s * (a3 + 2.0 * b3 + 2.0 * c3 + d3),
        x4 + s * (a4 + 2.0 * b4 + 2.0 * c4 + d4),
        x5 + s * (a5 + 2.0 * b5 + 2.0 * c5 + d5),
    ]
    new[4] = _clip(new[4], params.omega_w_max)
    out = PlantState(*new)
    if not abs(out.theta) < params.theta_capsize:
        raise CapsizeError(out, params.theta_capsize)
    if not all(math.isfinite(a) for a in out):
        raise PlantError(f"non-finite state after step: {out}")
    return out


def theta_ddot_at(beta: float, theta: float, v: float, params: PlantParams) -> float:
    """Roll acceleration of the passive plant (no damping, wheel or disturbance)."""
    state = PlantState(theta=theta, beta=beta, v=v)
    return _rates(state, PlantInputs(), params)[1]


def equilibrium_beta(theta: float, v: float, params: PlantParams, tol: float = 1e-10) -> float:
    """Pendulum angle that holds ``theta`` steady at speed ``v``.

    Found by bisection on the plant's own roll acceleration over
    ``beta in [theta - pi/2, theta + pi/2]``, where it is monotone in ``beta``.
    """
    if not abs(theta) < params.theta_capsize:
        raise ValueError(f"|theta|={abs(theta)} outside capsize envelope")
    demand = params.M * v * v * math.tan(theta) / (params.m * params.g * params.l)
    if abs(demand) > 1.0:
        raise InfeasibleLeanError(
            f"lean {theta:.4f} rad at {v:.3f} m/s needs pendulum moment ratio {demand:.3f} > 1"
        )
    lo, hi = theta - math.pi / 2, theta + math.pi / 2
    f_lo = theta_ddot_at(lo, theta, v, params)
    if f_lo == 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = theta_ddot_at(mid, theta, v, params)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def roll_energy(state: PlantState, params: PlantParams) -> float:
    """Roll kinetic energy plus pendulum potential, valid with ``beta`` frozen."""
    return 0.5 * params.J_roll * state.theta_dot ** 2 - params.m * params.g * params.l * math.cos(
        state.beta - state.theta
    )


def roll_momentum(state: PlantState, params: PlantParams) -> float:
    return params.J_roll * state.theta_dot + params.J_w * state.omega_w
