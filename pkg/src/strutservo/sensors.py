"""Measurement layer: force, displacement and temperature channels.

Each channel applies bias, Gaussian noise and quantization to the plant truth,
draws only from its own named random stream, and can be degraded by injected
faults (stuck, dropout, drift).  Validation stamps readings out_of_range or
stale; it never repairs a value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .rng import StreamBank


class SensorKind(str, Enum):
    FORCE = "force"
    DISPLACEMENT = "displacement"
    TEMPERATURE = "temperature"


class ReadingStatus(str, Enum):
    OK = "ok"
    OUT_OF_RANGE = "out_of_range"
    STALE = "stale"


# Artifact defaults; the real accuracies are not specified anywhere upstream.
DEFAULT_NOISE_SIGMA = {
    SensorKind.FORCE: 2.0,          # kN
    SensorKind.DISPLACEMENT: 0.05,  # mm
    SensorKind.TEMPERATURE: 0.1,    # degC
}
DEFAULT_RANGE = {
    SensorKind.FORCE: (0.0, 10_000.0),
    SensorKind.DISPLACEMENT: (-100.0, 500.0),
    SensorKind.TEMPERATURE: (-40.0, 80.0),
}


@dataclass(frozen=True)
class SensorSpec:
    kind: SensorKind
    noise_sigma: float = 0.0
    bias: float = 0.0
    quantum: float = 0.0
    range: tuple[float, float] = (0.0, 10_000.0)
    period_ticks: int = 1

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.quantum < 0:
            raise ValueError("quantum must be >= 0")
        lo, hi = self.range
        if not lo < hi:
            raise ValueError("range lo must be < hi")
        if self.period_ticks < 1:
            raise ValueError("period_ticks must be >= 1")


@dataclass(frozen=True)
class Reading:
    tick: int
    channel: str  # "<strut_id>/<kind>"
    value: float
    status: ReadingStatus = ReadingStatus.OK


class FaultKind(str, Enum):
    STUCK = "stuck"
    DROPOUT = "dropout"
    DRIFT = "drift"


@dataclass(frozen=True)
class SensorFault:
    kind: FaultKind
    start_tick: int
    end_tick: int
    magnitude: float = 0.0  # drift rate, units/s

    def __post_init__(self):
        if self.start_tick > self.end_tick:
            raise ValueError("fault start_tick must be <= end_tick")

    def active_at(self, tick: int) -> bool:
        return self.start_tick <= tick <= self.end_tick


def quantize(value: float, quantum: float) -> float:
    """Round to the nearest quantum, half to even; 0 quantum means no quantization."""
    if quantum == 0.0:
        return value
    return round(value / quantum) * quantum


def sample(spec: SensorSpec, channel: str, true_value: float, tick: int, streams: StreamBank) -> Reading:
    """One measurement of the plant truth; draws come only from the channel's stream."""
    if tick % spec.period_ticks != 0:
        raise ValueError(f"tick {tick} not aligned to period {spec.period_ticks}")
    noise = streams.normal(channel, spec.noise_sigma)
    value = quantize(true_value + spec.bias + noise, spec.quantum)
    lo, hi = spec.range
    status = ReadingStatus.OK if lo <= value <= hi else ReadingStatus.OUT_OF_RANGE
    return Reading(tick=tick, channel=channel, value=value, status=status)


def apply_fault(reading: Reading, fault: SensorFault, last_good: Reading, tick_seconds: float) -> Reading:
    """Degrade a fresh reading according to an active fault.

    stuck repeats the last good sample wholesale (value and tick), so the
    staleness validator catches it; dropout keeps the carried value but flags
    it stale immediately; drift adds a ramp that validation cannot see.
    """
    if not fault.active_at(reading.tick):
        return reading
    if fault.kind is FaultKind.STUCK:
        return replace(last_good, channel=reading.channel)
    if fault.kind is FaultKind.DROPOUT:
        return replace(reading, value=last_good.value, status=ReadingStatus.STALE)
    offset = fault.magnitude * (reading.tick - fault.start_tick) * tick_seconds
    return replace(reading, value=reading.value + offset)


def validate(reading: Reading, staleness_limit_ticks: int, now_tick: int) -> Reading:
    """Stamp staleness from sample age; an age equal to the limit is still fresh."""
    age = now_tick - reading.tick
    if age > staleness_limit_ticks:
        return replace(reading, status=ReadingStatus.STALE)
    return reading
