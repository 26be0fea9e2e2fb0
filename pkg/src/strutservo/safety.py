"""Alarm state machine, lock-assembly load sharing, and protective watchdogs.

Alarms have two severities. Warnings auto-clear once the value recedes past
the hysteresis gap; alarms latch and need both recession and an operator
acknowledgment before they clear ("unprocessed" until acked).  Alarm
evaluation consumes validated measurements, never plant truth: the deployed
system only ever sees its sensors.

The head assembly carries the axial force on up to three mechanical locks.
Load is shared equally among the engaged, non-failed locks; losing every lock
is a terminal structural fault, not a state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class AlarmLevel(str, Enum):
    NORMAL = "normal"
    WARNING = "warning"
    ALARM = "alarm"


class Direction(str, Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class AlarmThresholds:
    """One monitor: a warn/alarm pair on one side of a channel.

    A channel monitored on both sides carries two of these (one per
    direction).  warn_level sits strictly inside alarm_level for the monitor's
    direction, and the hysteresis gap is smaller than the warn-to-alarm gap.
    """

    channel: str
    direction: Direction
    warn_level: float
    alarm_level: float
    hysteresis: float

    def __post_init__(self):
        gap = self.alarm_level - self.warn_level
        if self.direction is Direction.LOW:
            gap = -gap
        if not gap > 0:
            raise ValueError(
                f"{self.channel}: warn_level must be strictly inside alarm_level"
            )
        if not 0 < self.hysteresis < gap:
            raise ValueError(
                f"{self.channel}: hysteresis must be in (0, |alarm - warn|)"
            )

    def breaches(self, value: float, level: float) -> bool:
        return value >= level if self.direction is Direction.HIGH else value <= level

    def receded(self, value: float, level: float) -> bool:
        if self.direction is Direction.HIGH:
            return value < level - self.hysteresis
        return value > level + self.hysteresis


@dataclass(frozen=True)
class AlarmState:
    channel: str
    level: AlarmLevel = AlarmLevel.NORMAL
    latched: bool = False
    acknowledged: bool = False
    raised_tick: int | None = None
    cleared_tick: int | None = None


class AlarmAckError(Exception):
    """Acknowledgment addressed to a channel with no active alarm."""


def evaluate_alarm(
    prev: AlarmState, value: float, thresholds: AlarmThresholds, tick: int
) -> AlarmState:
    """One transition of the per-monitor state machine.

    normal -> warning -> alarm as the value crosses the levels (a single call
    may jump normal -> alarm); warnings auto-clear past warn - hysteresis;
    alarms hold until the value recedes past alarm - hysteresis AND the alarm
    was acknowledged, then fall to warning or normal as the value dictates.
    """
    level = prev.level

    if level is AlarmLevel.NORMAL:
        if thresholds.breaches(value, thresholds.alarm_level):
            return replace(prev, level=AlarmLevel.ALARM, latched=True,
                           acknowledged=False, raised_tick=tick, cleared_tick=None)
        if thresholds.breaches(value, thresholds.warn_level):
            return replace(prev, level=AlarmLevel.WARNING)
        return prev

    if level is AlarmLevel.WARNING:
        if thresholds.breaches(value, thresholds.alarm_level):
            return replace(prev, level=AlarmLevel.ALARM, latched=True,
                           acknowledged=False, raised_tick=tick, cleared_tick=None)
        if thresholds.receded(value, thresholds.warn_level):
            return replace(prev, level=AlarmLevel.NORMAL)
        return prev

    # ALARM: latched until receded past hysteresis and acknowledged.
    if prev.acknowledged and thresholds.receded(value, thresholds.alarm_level):
        if thresholds.breaches(value, thresholds.warn_level):
            return replace(prev, level=AlarmLevel.WARNING, latched=False,
                           acknowledged=False, cleared_tick=tick)
        return replace(prev, level=AlarmLevel.NORMAL, latched=False,
                       acknowledged=False, cleared_tick=tick)
    return prev


def acknowledge(state: AlarmState, operator_id: str, tick: int) -> AlarmState:
    """Mark an active alarm as processed; clearing still waits for recession."""
    if state.level is not AlarmLevel.ALARM:
        raise AlarmAckError(f"no_active_alarm on channel {state.channel}")
    return replace(state, acknowledged=True)


class AllLocksFailedError(Exception):
    """Terminal structural fault: nothing left to carry the head load."""


@dataclass
class LockAssembly:
    n_locks: int = 3
    capacity_kn: float = 1237.5  # 0.55 * design force by default
    failed: frozenset[int] = frozenset()
    engaged: tuple[bool, ...] = ()
    cycle_counts: tuple[int, ...] = ()  # engage/disengage events, for wear tracking

    def __post_init__(self):
        if not 1 <= self.n_locks <= 3:
            raise ValueError("n_locks must be 1..3")
        if not self.capacity_kn > 0:
            raise ValueError("capacity_kn must be > 0")
        if not self.engaged:
            self.engaged = tuple(True for _ in range(self.n_locks))
        if not self.cycle_counts:
            # initial engagement counts as one cycle
            self.cycle_counts = tuple(1 if e else 0 for e in self.engaged)
        if len(self.failed) >= self.n_locks:
            raise ValueError("total lock failure is a terminal fault, not a valid state")

    def carrying(self) -> list[int]:
        return [i for i in range(self.n_locks)
                if i not in self.failed and self.engaged[i]]

    def fail_lock(self, index: int) -> "LockAssembly":
        """Mark one lock failed (disengaging it); raises if none would remain."""
        if not 0 <= index < self.n_locks:
            raise ValueError(f"lock index {index} out of range")
        failed = frozenset(self.failed | {index})
        if len(failed) >= self.n_locks:
            raise AllLocksFailedError(f"all {self.n_locks} locks failed")
        engaged = tuple(e and i != index for i, e in enumerate(self.engaged))
        cycles = tuple(c + (1 if i == index and self.engaged[i] else 0)
                       for i, c in enumerate(self.cycle_counts))
        return LockAssembly(self.n_locks, self.capacity_kn, failed, engaged, cycles)


def lock_loads(total_force_kn: float, assembly: LockAssembly) -> list[float]:
    """Equal split of the head load across carrying locks; failed locks carry 0.

    The last carrying lock takes the rounding remainder so the loads always
    sum to the total exactly.
    """
    carrying = assembly.carrying()
    if not carrying:
        raise AllLocksFailedError("no carrying locks")
    share = total_force_kn / len(carrying)
    loads = [0.0] * assembly.n_locks
    for i in carrying[:-1]:
        loads[i] = share
    loads[carrying[-1]] = total_force_kn - share * (len(carrying) - 1)
    return loads


def check_lock_capacity(loads: list[float], capacity_kn: float) -> list[int]:
    """Indices of overloaded locks; empty means ok."""
    return [i for i, load in enumerate(loads) if load > capacity_kn]


@dataclass
class PumpDutyWatch:
    """Overcurrent stand-in: warns when the pump works too hard for too long.

    Tracks |command| integrated over a sliding window; the alarm machine's
    warn/alarm levels are fractions of the window's full-rate capacity.
    """

    window_ticks: int = 60
    history: list[float] = field(default_factory=list)

    def update(self, command_mm_per_s: float, dt_s: float) -> float:
        """Record one tick; returns |command| integrated over the window (mm of travel)."""
        self.history.append(abs(command_mm_per_s) * dt_s)
        if len(self.history) > self.window_ticks:
            del self.history[: len(self.history) - self.window_ticks]
        return sum(self.history)
