"""Digital twin and closed-loop axial-force servo simulator for steel strut supports."""

from .control import ControlMode, ControllerState, ModeKind, PidGains, pid_step, thermal_feedforward
from .engine import Engine, run_scenario
from .plant import (
    PlantState,
    SoilParams,
    StrutParams,
    solve_equilibrium,
    step_plant,
    thermal_elongation,
)
from .safety import (
    AlarmLevel,
    AlarmState,
    AlarmThresholds,
    LockAssembly,
    acknowledge,
    check_lock_capacity,
    evaluate_alarm,
    lock_loads,
)
from .scenario import Scenario, ScenarioError, load_scenario, load_scenario_file
from .sensors import Reading, SensorFault, SensorKind, SensorSpec
from .telemetry import TelemetryRecord, TelemetryStore

__version__ = "0.1.0"

__all__ = [
    "AlarmLevel",
    "AlarmState",
    "AlarmThresholds",
    "ControlMode",
    "ControllerState",
    "Engine",
    "LockAssembly",
    "ModeKind",
    "PidGains",
    "PlantState",
    "Reading",
    "Scenario",
    "ScenarioError",
    "SensorFault",
    "SensorKind",
    "SensorSpec",
    "SoilParams",
    "StrutParams",
    "TelemetryRecord",
    "TelemetryStore",
    "acknowledge",
    "check_lock_capacity",
    "evaluate_alarm",
    "load_scenario",
    "load_scenario_file",
    "lock_loads",
    "pid_step",
    "run_scenario",
    "solve_equilibrium",
    "step_plant",
    "thermal_elongation",
    "thermal_feedforward",
]
