"""Closed-loop axial-force regulator.

One controller instance per strut.  Each tick the supervisor classifies the
fresh measurements into a decision (hold inside the deadband, regulate, or
unconditional auto-retract above the hard force limit), the PID turns the
error into a jack rate, and a thermal feed-forward term tracks measured strut
temperature so force stays put before any error develops.  The command
variable is jack extension rate in mm/s; position comes from integration in
the plant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .plant import StrutParams, thermal_elongation
from .sensors import Reading, ReadingStatus, SensorKind


class ControlFaultError(Exception):
    """Non-finite error signal; the engine responds by locking the loop."""


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.002  # mm/s per kN (per mm in displacement mode)
    ki: float = 0.0002
    kd: float = 0.0
    integral_limit: float = 0.3  # cap on the integral term's output share, mm/s
    output_limit: float = 0.5  # cap on command magnitude, mm/s
    derivative_filter_alpha: float = 0.9

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("gains must be >= 0")
        if not self.integral_limit > 0 or not self.output_limit > 0:
            raise ValueError("limits must be > 0")
        if not 0.0 <= self.derivative_filter_alpha <= 1.0:
            raise ValueError("derivative_filter_alpha must be in [0, 1]")


@dataclass(frozen=True)
class ControllerState:
    integral: float = 0.0  # accumulated error*dt
    prev_error: float = 0.0
    filtered_derivative: float = 0.0
    last_command_mm_per_s: float = 0.0
    ff_ref_temp_c: float = 20.0  # lock-off temperature the feed-forward nulls against
    ff_applied_mm: float = 0.0  # cumulative feed-forward offset already commanded


class ModeKind(str, Enum):
    FORCE_HOLD = "force_hold"
    DISPLACEMENT_HOLD = "displacement_hold"
    MANUAL = "manual"
    LOCKED = "locked"


@dataclass(frozen=True)
class ControlMode:
    kind: ModeKind
    setpoint: float = 0.0  # kN in force_hold, mm in displacement_hold
    deadband: float = 0.0
    jog_rate_mm_per_s: float = 0.0

    def __post_init__(self):
        if self.deadband < 0:
            raise ValueError("deadband must be >= 0")


class Action(str, Enum):
    HOLD = "hold"
    REGULATE = "regulate"
    AUTO_RETRACT = "auto_retract"
    MANUAL_JOG = "manual_jog"


@dataclass(frozen=True)
class Decision:
    action: Action
    error: float = 0.0
    fault: str | None = None


def pid_step(
    gains: PidGains, state: ControllerState, error: float, dt_s: float
) -> tuple[float, ControllerState]:
    """One discrete PID evaluation.

    Integral accumulation is conditional: it pauses while the output is
    saturated in the error's own direction, and the integral term's output
    share is hard-clamped to integral_limit either way.
    """
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    if not math.isfinite(error):
        raise ControlFaultError(f"non-finite error signal: {error}")

    p = gains.kp * error

    raw_d = (error - state.prev_error) / dt_s
    a = gains.derivative_filter_alpha
    filtered_d = a * state.filtered_derivative + (1.0 - a) * raw_d
    d = gains.kd * filtered_d

    integral = state.integral + error * dt_s
    if gains.ki > 0.0:
        cap = gains.integral_limit / gains.ki
        integral = min(max(integral, -cap), cap)
    unsat = p + gains.ki * integral + d
    if abs(unsat) > gains.output_limit and unsat * error > 0.0:
        integral = state.integral  # saturated in the error direction: stop winding
        unsat = p + gains.ki * integral + d

    command = min(max(unsat, -gains.output_limit), gains.output_limit)
    new_state = replace(
        state,
        integral=integral,
        prev_error=error,
        filtered_derivative=filtered_d,
        last_command_mm_per_s=command,
    )
    return command, new_state


def thermal_feedforward(strut: StrutParams, temp_c: float, ff_ref_temp_c: float) -> float:
    """Jack offset (mm) that cancels the strut's thermal elongation exactly."""
    return -thermal_elongation(strut, temp_c - ff_ref_temp_c)


def supervise(
    mode: ControlMode,
    measurements: dict[SensorKind, Reading],
    retract_limit_kn: float,
    strut: StrutParams,
) -> Decision:
    """Classify this tick: hold, regulate toward setpoint, or force-limit retract.

    Only fresh (status ok) measurements are acted on; anything else holds the
    jack and flags a fault.  The hard retract limit overrides the PID in every
    regulating mode.
    """
    if mode.kind is ModeKind.LOCKED:
        return Decision(Action.HOLD)
    if mode.kind is ModeKind.MANUAL:
        return Decision(Action.MANUAL_JOG)

    force = measurements.get(SensorKind.FORCE)
    if force is not None and force.status is ReadingStatus.OK and force.value > retract_limit_kn:
        return Decision(Action.AUTO_RETRACT)

    if mode.kind is ModeKind.FORCE_HOLD:
        primary = force
    else:
        primary = measurements.get(SensorKind.DISPLACEMENT)
    if primary is None or primary.status is not ReadingStatus.OK:
        status = "missing" if primary is None else primary.status.value
        return Decision(Action.HOLD, fault=f"measurement_{status}")

    lo = mode.setpoint - mode.deadband
    hi = mode.setpoint + mode.deadband
    if lo <= primary.value <= hi:
        return Decision(Action.HOLD)

    if mode.kind is ModeKind.FORCE_HOLD:
        error = mode.setpoint - primary.value  # low force -> extend
    else:
        error = primary.value - mode.setpoint  # excess wall yield -> extend
    return Decision(Action.REGULATE, error=error)


def limit_command(
    command_mm_per_s: float,
    jack_ext_mm: float,
    strut: StrutParams,
    locked: bool = False,
) -> float:
    """Rate clamp plus limit switches at the stroke ends; locked forces zero."""
    if locked:
        return 0.0
    limit = strut.jack_rate_limit_mm_per_s
    command = min(max(command_mm_per_s, -limit), limit)
    lo, hi = strut.jack_stroke_mm
    if jack_ext_mm >= hi and command > 0.0:
        return 0.0
    if jack_ext_mm <= lo and command < 0.0:
        return 0.0
    return command


@dataclass(frozen=True)
class ControlOutput:
    command_mm_per_s: float
    state: ControllerState
    decision: Decision
    pid_command_mm_per_s: float = 0.0
    ff_rate_mm_per_s: float = 0.0


def control_step(
    gains: PidGains,
    mode: ControlMode,
    state: ControllerState,
    measurements: dict[SensorKind, Reading],
    strut: StrutParams,
    retract_limit_kn: float,
    jack_ext_mm: float,
    dt_s: float,
    ff_time_constant_s: float = 0.0,
) -> ControlOutput:
    """Full per-tick controller: supervisor, PID, feed-forward, command limiting.

    The feed-forward tracks measured strut temperature toward the exact
    cancellation offset -alpha*L*(T_meas - T_ref).  A nonzero
    ff_time_constant_s makes the tracking first-order, which keeps temperature
    sensor noise from being replayed into the jack at full strut stiffness;
    zero tracks in a single step.  The feed-forward advances only while
    regulating or holding inside the deadband; manual, locked, auto-retract
    and fault holds freeze it.
    """
    decision = supervise(mode, measurements, retract_limit_kn, strut)
    locked = mode.kind is ModeKind.LOCKED

    if decision.action is Action.MANUAL_JOG:
        cmd = limit_command(mode.jog_rate_mm_per_s, jack_ext_mm, strut, locked)
        return ControlOutput(cmd, replace(state, last_command_mm_per_s=cmd), decision)

    if decision.action is Action.AUTO_RETRACT:
        cmd = limit_command(-strut.jack_rate_limit_mm_per_s, jack_ext_mm, strut, locked)
        return ControlOutput(cmd, replace(state, last_command_mm_per_s=cmd), decision)

    if decision.fault is not None or locked:
        cmd = 0.0
        return ControlOutput(cmd, replace(state, last_command_mm_per_s=cmd), decision)

    temp = measurements.get(SensorKind.TEMPERATURE)
    ff_rate = 0.0
    ff_applied = state.ff_applied_mm
    if temp is not None and temp.status is ReadingStatus.OK:
        target = thermal_feedforward(strut, temp.value, state.ff_ref_temp_c)
        if ff_time_constant_s > 0.0:
            step_fraction = 1.0 - math.exp(-dt_s / ff_time_constant_s)
        else:
            step_fraction = 1.0
        limit = strut.jack_rate_limit_mm_per_s
        ff_rate = (target - ff_applied) * step_fraction / dt_s
        ff_rate = min(max(ff_rate, -limit), limit)
        ff_applied = ff_applied + ff_rate * dt_s

    if decision.action is Action.HOLD:
        pid_cmd = 0.0  # exact zero inside the deadband; integral frozen
        new_state = replace(state, ff_applied_mm=ff_applied)
    else:
        pid_cmd, new_state = pid_step(gains, state, decision.error, dt_s)
        new_state = replace(new_state, ff_applied_mm=ff_applied)

    cmd = limit_command(pid_cmd + ff_rate, jack_ext_mm, strut, locked)
    new_state = replace(new_state, last_command_mm_per_s=cmd)
    return ControlOutput(cmd, new_state, decision, pid_cmd, ff_rate)
