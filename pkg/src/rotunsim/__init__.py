"""Roll-plane simulator of a pendulum-driven spherical robot with a momentum wheel."""

from .control import ControlConfig, GainSchedule, Mode, controller_step, feedforward_beta
from .plant import CapsizeError, ParamError, PlantInputs, PlantParams, PlantState, equilibrium_beta, step_rk4
from .sim import DisturbanceSpec, MeasurementModel, Scenario, TelemetryRecord, TimelineSegment, Trajectory, run

__version__ = "0.1.0"

__all__ = [
    "CapsizeError",
    "ControlConfig",
    "DisturbanceSpec",
    "GainSchedule",
    "MeasurementModel",
    "Mode",
    "ParamError",
    "PlantInputs",
    "PlantParams",
    "PlantState",
    "Scenario",
    "TelemetryRecord",
    "TimelineSegment",
    "Trajectory",
    "controller_step",
    "equilibrium_beta",
    "feedforward_beta",
    "run",
    "step_rk4",
]
