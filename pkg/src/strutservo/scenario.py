"""Declarative experiment documents.

A scenario is one YAML mapping that fully determines a run: plant parameters
per strut, sensor specs, controller gains and modes, alarm thresholds, lock
configuration, excavation stages, the ambient temperature profile, injected
faults, and an optional scripted command stream.  Parsing is strict: unknown
keys and invariant violations are reported with the offending field's path.
Everything not given falls back to the documented defaults (see README).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import yaml

from .control import ControlMode, ModeKind, PidGains
from .plant import SoilParams, StrutParams
from .safety import AlarmThresholds, Direction
from .sensors import (
    DEFAULT_NOISE_SIGMA,
    DEFAULT_RANGE,
    FaultKind,
    SensorFault,
    SensorKind,
    SensorSpec,
)

PUMP_DUTY_WINDOW_TICKS = 60


class ScenarioError(ValueError):
    """Parse or validation failure; the message names the field path."""


@dataclass(frozen=True)
class StrutConfig:
    id: str
    strut: StrutParams
    soil: SoilParams
    prestress_kn: float


@dataclass(frozen=True)
class ControllerConfig:
    gains: PidGains
    modes: dict[str, ControlMode]
    staleness_limit_ticks: int = 5
    retract_limit_fraction: float = 1.2
    ff_time_constant_s: float = 10.0  # feed-forward tracking filter


@dataclass(frozen=True)
class LockConfig:
    n_locks: int = 3
    capacity_kn: float | None = None  # None: 0.55 * design force per strut


@dataclass(frozen=True)
class ScheduledStage:
    tick: int
    strut_ids: tuple[str, ...]
    increment_kn: float


@dataclass(frozen=True)
class ScheduledFault:
    strut_id: str
    sensor: SensorKind
    fault: SensorFault


@dataclass(frozen=True)
class ScheduledLockFailure:
    tick: int
    strut_id: str
    lock_index: int


@dataclass(frozen=True)
class ScriptedCommand:
    tick: int
    payload: dict[str, Any]


@dataclass(frozen=True)
class Envelope:
    """Safe ranges for operator-command payloads."""

    force_setpoint_kn: tuple[float, float]
    displacement_setpoint_mm: tuple[float, float] = (0.0, 50.0)
    jog_mm_per_s: tuple[float, float] = (-0.5, 0.5)


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    dt_s: float
    duration_ticks: int
    seed: int
    struts: tuple[StrutConfig, ...]
    sensors: dict[str, dict[SensorKind, SensorSpec]]
    controller: ControllerConfig
    thresholds: tuple[AlarmThresholds, ...]
    locks: LockConfig
    stages: tuple[ScheduledStage, ...]
    temperature_profile: tuple[tuple[int, float], ...]
    faults: tuple[ScheduledFault, ...] = ()
    lock_failures: tuple[ScheduledLockFailure, ...] = ()
    command_script: tuple[ScriptedCommand, ...] = ()
    coupling: tuple[tuple[float, ...], ...] | None = None
    envelope: Envelope = Envelope((500.0, 2700.0))
    auth_token: str = "local-dev-token"

    def strut_ids(self) -> list[str]:
        return [s.id for s in self.struts]

    def strut_config(self, strut_id: str) -> StrutConfig:
        for s in self.struts:
            if s.id == strut_id:
                return s
        raise KeyError(strut_id)

    def ambient_at(self, tick: int) -> float:
        """Piecewise-linear ambient temperature; held flat outside the profile."""
        profile = self.temperature_profile
        if tick <= profile[0][0]:
            return profile[0][1]
        for (t0, v0), (t1, v1) in zip(profile, profile[1:]):
            if t0 <= tick <= t1:
                if t1 == t0:
                    return v1
                return v0 + (v1 - v0) * (tick - t0) / (t1 - t0)
        return profile[-1][1]


# ---------------------------------------------------------------------------
# strict mapping walker

_REQUIRED = object()


def _err(path: str, msg: str) -> ScenarioError:
    return ScenarioError(f"{path}: {msg}" if path else msg)


class _Node:
    """Cursor into the raw document that tracks its path and rejects unknown keys."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise _err(path or "<root>", f"expected a mapping, got {type(data).__name__}")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def _sub(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key: str, default: Any = _REQUIRED) -> Any:
        self.seen.add(key)
        if key in self.data:
            return self.data[key]
        if default is _REQUIRED:
            raise _err(self.path or "<root>", f"missing required field '{key}'")
        return default

    def number(self, key: str, default: Any = _REQUIRED) -> float:
        v = self.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise _err(self._sub(key), f"expected a number, got {v!r}")
        return float(v)

    def integer(self, key: str, default: Any = _REQUIRED) -> int:
        v = self.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise _err(self._sub(key), f"expected an integer, got {v!r}")
        return v

    def string(self, key: str, default: Any = _REQUIRED) -> str:
        v = self.get(key, default)
        if not isinstance(v, str):
            raise _err(self._sub(key), f"expected a string, got {v!r}")
        return v

    def pair(self, key: str, default: Any = _REQUIRED) -> tuple[float, float]:
        v = self.get(key, default)
        if isinstance(v, tuple):
            return v
        if not isinstance(v, list) or len(v) != 2:
            raise _err(self._sub(key), f"expected a [lo, hi] pair, got {v!r}")
        return float(v[0]), float(v[1])

    def mapping(self, key: str, default: Any = _REQUIRED) -> "_Node | None":
        v = self.get(key, default)
        if v is default and v is not _REQUIRED:
            return None
        return _Node(v, self._sub(key))

    def sequence(self, key: str, default: Any = _REQUIRED) -> list:
        v = self.get(key, default)
        if v is None:
            return []
        if not isinstance(v, list):
            raise _err(self._sub(key), f"expected a list, got {v!r}")
        return v

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            raise _err(self.path or "<root>",
                       f"unknown field(s): {', '.join(sorted(unknown))}")


def _wrap(path: str, fn, *args):
    """Re-raise constructor ValueErrors with the field path attached."""
    try:
        return fn(*args)
    except ScenarioError:
        raise
    except ValueError as e:
        raise _err(path, str(e)) from e


# ---------------------------------------------------------------------------
# section parsers

def _parse_strut_params(node: _Node | None, path: str) -> StrutParams:
    if node is None:
        return StrutParams()
    kw = dict(
        length_mm=node.number("length_mm", 10_000.0),
        axial_stiffness_kn_per_mm=node.number("axial_stiffness_kn_per_mm", 626.0),
        thermal_coeff_per_c=node.number("thermal_coeff_per_c", 1.2e-5),
        jack_stroke_mm=node.pair("jack_stroke_mm", (-50.0, 150.0)),
        jack_rate_limit_mm_per_s=node.number("jack_rate_limit_mm_per_s", 0.5),
        design_force_kn=node.number("design_force_kn", 2250.0),
        temp_time_constant_s=node.number("temp_time_constant_s", 60.0),
    )
    node.finish()
    return _wrap(path, lambda: StrutParams(**kw))


def _parse_soil_params(node: _Node | None, path: str) -> SoilParams:
    if node is None:
        return SoilParams()
    kw = dict(
        driving_load_kn=node.number("driving_load_kn", 3000.0),
        soil_stiffness_kn_per_mm=node.number("soil_stiffness_kn_per_mm", 200.0),
        load_bounds_kn=node.pair("load_bounds_kn", (0.0, 10_000.0)),
        wall_time_constant_s=node.number("wall_time_constant_s", 60.0),
    )
    node.finish()
    return _wrap(path, lambda: SoilParams(**kw))


def _parse_struts(root: _Node) -> tuple[StrutConfig, ...]:
    raw = root.sequence("struts", [{"id": "S1"}])
    if not raw:
        raise _err("struts", "at least one strut is required")
    out = []
    ids = set()
    for i, item in enumerate(raw):
        node = _Node(item, f"struts[{i}]")
        sid = node.string("id")
        if sid in ids:
            raise _err(f"struts[{i}].id", f"duplicate strut id '{sid}'")
        ids.add(sid)
        strut = _parse_strut_params(node.mapping("strut", None), f"struts[{i}].strut")
        soil = _parse_soil_params(node.mapping("soil", None), f"struts[{i}].soil")
        prestress = node.number("prestress_kn", strut.design_force_kn)
        if prestress < 0:
            raise _err(f"struts[{i}].prestress_kn", "must be >= 0")
        node.finish()
        out.append(StrutConfig(id=sid, strut=strut, soil=soil, prestress_kn=prestress))
    return tuple(out)


def default_sensor_spec(kind: SensorKind) -> SensorSpec:
    return SensorSpec(kind=kind, noise_sigma=DEFAULT_NOISE_SIGMA[kind],
                      range=DEFAULT_RANGE[kind], period_ticks=1)


def _parse_sensor_spec(node: _Node, kind: SensorKind, path: str) -> SensorSpec:
    base = default_sensor_spec(kind)
    kw = dict(
        kind=kind,
        noise_sigma=node.number("noise_sigma", base.noise_sigma),
        bias=node.number("bias", 0.0),
        quantum=node.number("quantum", 0.0),
        range=node.pair("range", base.range),
        period_ticks=node.integer("period_ticks", 1),
    )
    node.finish()
    return _wrap(path, lambda: SensorSpec(**kw))


def _parse_sensors(root: _Node, strut_ids: list[str]) -> dict[str, dict[SensorKind, SensorSpec]]:
    out: dict[str, dict[SensorKind, SensorSpec]] = {
        sid: {kind: default_sensor_spec(kind) for kind in SensorKind} for sid in strut_ids
    }
    node = root.mapping("sensors", None)
    if node is None:
        return out
    for sid in list(node.data):
        if sid not in strut_ids:
            raise _err(f"sensors.{sid}", f"unknown strut '{sid}'")
        per = node.mapping(sid)
        for kname in list(per.data):
            try:
                kind = SensorKind(kname)
            except ValueError:
                raise _err(f"sensors.{sid}.{kname}", "unknown sensor kind") from None
            spec_node = per.mapping(kname)
            out[sid][kind] = _parse_sensor_spec(spec_node, kind, f"sensors.{sid}.{kname}")
        per.finish()
    node.finish()
    return out


def _parse_mode(node: _Node, strut: StrutConfig, path: str) -> ControlMode:
    kind_s = node.string("kind", "force_hold")
    try:
        kind = ModeKind(kind_s)
    except ValueError:
        raise _err(f"{path}.kind", f"unknown mode '{kind_s}'") from None
    design = strut.strut.design_force_kn
    if kind is ModeKind.FORCE_HOLD:
        setpoint = node.number("setpoint_kn", design)
        deadband = node.number("deadband_kn", node.number("deadband_fraction", 0.05) * setpoint)
    elif kind is ModeKind.DISPLACEMENT_HOLD:
        setpoint = node.number("setpoint_mm")
        deadband = node.number("deadband_mm", 0.5)
    else:
        setpoint, deadband = 0.0, 0.0
    jog = node.number("jog_mm_per_s", 0.0) if kind is ModeKind.MANUAL else 0.0
    node.finish()
    return _wrap(path, lambda: ControlMode(kind=kind, setpoint=setpoint,
                                           deadband=deadband, jog_rate_mm_per_s=jog))


def _parse_controller(root: _Node, struts: tuple[StrutConfig, ...]) -> ControllerConfig:
    node = root.mapping("controller", None)
    by_id = {s.id: s for s in struts}
    if node is None:
        modes = {s.id: _default_mode(s) for s in struts}
        return ControllerConfig(gains=PidGains(), modes=modes)

    gains_node = node.mapping("gains", None)
    if gains_node is None:
        gains = PidGains()
    else:
        kw = dict(
            kp=gains_node.number("kp", 0.002),
            ki=gains_node.number("ki", 0.0002),
            kd=gains_node.number("kd", 0.0),
            integral_limit=gains_node.number("integral_limit", 0.3),
            output_limit=gains_node.number("output_limit", 0.5),
            derivative_filter_alpha=gains_node.number("derivative_filter_alpha", 0.9),
        )
        gains_node.finish()
        gains = _wrap("controller.gains", lambda: PidGains(**kw))

    staleness = node.integer("staleness_limit_ticks", 5)
    if staleness < 1:
        raise _err("controller.staleness_limit_ticks", "must be >= 1")
    retract_frac = node.number("retract_limit_fraction", 1.2)
    if not retract_frac > 1.0:
        raise _err("controller.retract_limit_fraction", "must be > 1")
    ff_tau = node.number("ff_time_constant_s", 10.0)
    if ff_tau < 0:
        raise _err("controller.ff_time_constant_s", "must be >= 0")

    modes = {s.id: _default_mode(s) for s in struts}
    modes_node = node.mapping("modes", None)
    if modes_node is not None:
        for sid in list(modes_node.data):
            if sid not in by_id:
                raise _err(f"controller.modes.{sid}", f"unknown strut '{sid}'")
            modes[sid] = _parse_mode(modes_node.mapping(sid), by_id[sid],
                                     f"controller.modes.{sid}")
        modes_node.finish()
    node.finish()
    return ControllerConfig(gains=gains, modes=modes,
                            staleness_limit_ticks=staleness,
                            retract_limit_fraction=retract_frac,
                            ff_time_constant_s=ff_tau)


def _default_mode(s: StrutConfig) -> ControlMode:
    design = s.strut.design_force_kn
    return ControlMode(ModeKind.FORCE_HOLD, setpoint=design, deadband=0.05 * design)


def default_thresholds(sid: str, strut: StrutParams, dt_s: float) -> list[AlarmThresholds]:
    """Per-strut monitors derived from the design force and pump window."""
    design = strut.design_force_kn
    duty_cap = PUMP_DUTY_WINDOW_TICKS * strut.jack_rate_limit_mm_per_s * dt_s
    return [
        AlarmThresholds(f"{sid}/force/high", Direction.HIGH, 1.1 * design, 1.2 * design, 0.02 * design),
        AlarmThresholds(f"{sid}/force/low", Direction.LOW, 0.9 * design, 0.8 * design, 0.02 * design),
        AlarmThresholds(f"{sid}/displacement/high", Direction.HIGH, 20.0, 30.0, 2.0),
        AlarmThresholds(f"{sid}/temperature/high", Direction.HIGH, 45.0, 55.0, 2.0),
        AlarmThresholds(f"{sid}/pump_duty/high", Direction.HIGH, 0.5 * duty_cap, 0.9 * duty_cap, 0.05 * duty_cap),
    ]


_THRESHOLD_CHANNELS = ("force", "displacement", "temperature", "pump_duty")


def _parse_thresholds(root: _Node, struts: tuple[StrutConfig, ...], dt_s: float
                      ) -> tuple[AlarmThresholds, ...]:
    raw = root.sequence("thresholds", None)
    monitors: dict[str, AlarmThresholds] = {}
    for s in struts:
        for t in default_thresholds(s.id, s.strut, dt_s):
            monitors[t.channel] = t
    ids = [s.id for s in struts]
    for i, item in enumerate(raw):
        node = _Node(item, f"thresholds[{i}]")
        channel = node.string("channel")
        if channel not in _THRESHOLD_CHANNELS:
            raise _err(f"thresholds[{i}].channel",
                       f"must be one of {', '.join(_THRESHOLD_CHANNELS)}")
        direction_s = node.string("direction", "high")
        try:
            direction = Direction(direction_s)
        except ValueError:
            raise _err(f"thresholds[{i}].direction", f"unknown direction '{direction_s}'") from None
        warn = node.number("warn")
        alarm = node.number("alarm")
        hyst = node.number("hysteresis")
        strut_sel = node.string("strut", "")
        node.finish()
        targets = [strut_sel] if strut_sel else ids
        for sid in targets:
            if sid not in ids:
                raise _err(f"thresholds[{i}].strut", f"unknown strut '{sid}'")
            name = f"{sid}/{channel}/{direction.value}"
            monitors[name] = _wrap(
                f"thresholds[{i}]",
                lambda n=name: AlarmThresholds(n, direction, warn, alarm, hyst))
    return tuple(monitors[k] for k in sorted(monitors))


def _parse_locks(root: _Node) -> LockConfig:
    node = root.mapping("locks", None)
    if node is None:
        return LockConfig()
    n = node.integer("n_locks", 3)
    if not 1 <= n <= 3:
        raise _err("locks.n_locks", "must be 1..3")
    cap_raw = node.get("capacity_kn", None)
    if cap_raw is not None and (isinstance(cap_raw, bool) or not isinstance(cap_raw, (int, float))):
        raise _err("locks.capacity_kn", f"expected a number, got {cap_raw!r}")
    node.finish()
    return LockConfig(n_locks=n, capacity_kn=None if cap_raw is None else float(cap_raw))


def _parse_stages(root: _Node, ids: list[str]) -> tuple[ScheduledStage, ...]:
    raw = root.sequence("stages", None)
    out = []
    last_tick = -1
    for i, item in enumerate(raw):
        node = _Node(item, f"stages[{i}]")
        tick = node.integer("tick")
        if tick <= last_tick:
            raise _err(f"stages[{i}].tick", "stage ticks must be strictly increasing")
        last_tick = tick
        strut_sel = node.sequence("struts", None) or ids
        for sid in strut_sel:
            if sid not in ids:
                raise _err(f"stages[{i}].struts", f"unknown strut '{sid}'")
        inc = node.number("increment_kn")
        node.finish()
        out.append(ScheduledStage(tick=tick, strut_ids=tuple(strut_sel), increment_kn=inc))
    return tuple(out)


def _parse_temperature_profile(root: _Node) -> tuple[tuple[int, float], ...]:
    raw = root.sequence("temperature_profile", [[0, 20.0]])
    if not raw:
        raw = [[0, 20.0]]
    out = []
    last_tick = None
    for i, item in enumerate(raw):
        if not isinstance(item, list) or len(item) != 2:
            raise _err(f"temperature_profile[{i}]", f"expected [tick, temp_c], got {item!r}")
        tick, temp = item
        if isinstance(tick, bool) or not isinstance(tick, int):
            raise _err(f"temperature_profile[{i}]", "tick must be an integer")
        if last_tick is not None and tick < last_tick:
            raise _err(f"temperature_profile[{i}]", "ticks must be non-decreasing")
        last_tick = tick
        out.append((tick, float(temp)))
    return tuple(out)


def _parse_faults(root: _Node, ids: list[str]) -> tuple[ScheduledFault, ...]:
    raw = root.sequence("faults", None)
    out = []
    for i, item in enumerate(raw):
        node = _Node(item, f"faults[{i}]")
        sid = node.string("strut")
        if sid not in ids:
            raise _err(f"faults[{i}].strut", f"unknown strut '{sid}'")
        sensor_s = node.string("sensor")
        try:
            sensor = SensorKind(sensor_s)
        except ValueError:
            raise _err(f"faults[{i}].sensor", f"unknown sensor kind '{sensor_s}'") from None
        kind_s = node.string("kind")
        try:
            fkind = FaultKind(kind_s)
        except ValueError:
            raise _err(f"faults[{i}].kind", f"unknown fault kind '{kind_s}'") from None
        fault = _wrap(f"faults[{i}]", lambda: SensorFault(
            kind=fkind,
            start_tick=node.integer("start_tick"),
            end_tick=node.integer("end_tick"),
            magnitude=node.number("magnitude", 0.0),
        ))
        node.finish()
        out.append(ScheduledFault(strut_id=sid, sensor=sensor, fault=fault))
    return tuple(out)


def _parse_lock_failures(root: _Node, ids: list[str], n_locks: int
                         ) -> tuple[ScheduledLockFailure, ...]:
    raw = root.sequence("lock_failures", None)
    out = []
    for i, item in enumerate(raw):
        node = _Node(item, f"lock_failures[{i}]")
        sid = node.string("strut")
        if sid not in ids:
            raise _err(f"lock_failures[{i}].strut", f"unknown strut '{sid}'")
        lock = node.integer("lock")
        if not 0 <= lock < n_locks:
            raise _err(f"lock_failures[{i}].lock", f"lock index must be 0..{n_locks - 1}")
        out.append(ScheduledLockFailure(tick=node.integer("tick"), strut_id=sid, lock_index=lock))
        node.finish()
    return tuple(out)


def _parse_command_script(root: _Node, ids: list[str]) -> tuple[ScriptedCommand, ...]:
    raw = root.sequence("command_script", None)
    out = []
    for i, item in enumerate(raw):
        node = _Node(item, f"command_script[{i}]")
        tick = node.integer("tick")
        payload = {k: v for k, v in item.items() if k != "tick"}
        if "kind" not in payload:
            raise _err(f"command_script[{i}]", "missing required field 'kind'")
        sid = payload.get("strut")
        if sid is not None and sid not in ids:
            raise _err(f"command_script[{i}].strut", f"unknown strut '{sid}'")
        out.append(ScriptedCommand(tick=tick, payload=payload))
    return tuple(out)


def _parse_coupling(root: _Node, n: int) -> tuple[tuple[float, ...], ...] | None:
    raw = root.get("coupling", None)
    if raw is None:
        return None
    if not isinstance(raw, list) or len(raw) != n or any(
            not isinstance(row, list) or len(row) != n for row in raw):
        raise _err("coupling", f"expected a {n}x{n} matrix")
    mat = tuple(tuple(float(x) for x in row) for row in raw)
    for i in range(n):
        for j in range(n):
            if abs(mat[i][j] - mat[j][i]) > 1e-12:
                raise _err("coupling", "matrix must be symmetric")
    return mat


def _parse_envelope(root: _Node, struts: tuple[StrutConfig, ...],
                    retract_frac: float) -> Envelope:
    max_design = max(s.strut.design_force_kn for s in struts)
    max_rate = max(s.strut.jack_rate_limit_mm_per_s for s in struts)
    node = root.mapping("envelope", None)
    defaults = Envelope(
        force_setpoint_kn=(500.0, retract_frac * max_design),
        displacement_setpoint_mm=(0.0, 50.0),
        jog_mm_per_s=(-max_rate, max_rate),
    )
    if node is None:
        return defaults
    env = Envelope(
        force_setpoint_kn=node.pair("force_setpoint_kn", defaults.force_setpoint_kn),
        displacement_setpoint_mm=node.pair("displacement_setpoint_mm",
                                           defaults.displacement_setpoint_mm),
        jog_mm_per_s=node.pair("jog_mm_per_s", defaults.jog_mm_per_s),
    )
    node.finish()
    for name, (lo, hi) in (("force_setpoint_kn", env.force_setpoint_kn),
                           ("displacement_setpoint_mm", env.displacement_setpoint_mm),
                           ("jog_mm_per_s", env.jog_mm_per_s)):
        if not lo < hi:
            raise _err(f"envelope.{name}", "lo must be < hi")
    return env


def load_scenario(text: str) -> Scenario:
    """Parse and validate one scenario document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError(f"parse error: {e}") from e
    if raw is None:
        raw = {}
    root = _Node(raw, "")

    meta = root.mapping("meta", None)
    if meta is None:
        name, description = "unnamed", ""
    else:
        name = meta.string("name", "unnamed")
        description = meta.string("description", "")
        meta.finish()

    dt_s = root.number("dt_s", 1.0)
    if not dt_s > 0:
        raise _err("dt_s", "must be > 0")
    duration = root.integer("duration_ticks", 600)
    if duration < 1:
        raise _err("duration_ticks", "must be >= 1")
    seed = root.integer("seed", 0)
    if seed < 0:
        raise _err("seed", "must be a non-negative 64-bit integer")
    seed &= 0xFFFFFFFFFFFFFFFF

    struts = _parse_struts(root)
    ids = [s.id for s in struts]
    sensors = _parse_sensors(root, ids)
    controller = _parse_controller(root, struts)
    thresholds = _parse_thresholds(root, struts, dt_s)
    locks = _parse_locks(root)
    stages = _parse_stages(root, ids)
    profile = _parse_temperature_profile(root)
    faults = _parse_faults(root, ids)
    lock_failures = _parse_lock_failures(root, ids, locks.n_locks)
    script = _parse_command_script(root, ids)
    coupling = _parse_coupling(root, len(ids))
    envelope = _parse_envelope(root, struts, controller.retract_limit_fraction)

    service = root.mapping("service", None)
    if service is None:
        token = "local-dev-token"
    else:
        token = service.string("auth_token", "local-dev-token")
        service.finish()

    root.finish()
    scenario = Scenario(
        name=name, description=description, dt_s=dt_s, duration_ticks=duration,
        seed=seed, struts=struts, sensors=sensors, controller=controller,
        thresholds=thresholds, locks=locks, stages=stages,
        temperature_profile=profile, faults=faults, lock_failures=lock_failures,
        command_script=script, coupling=coupling, envelope=envelope,
        auth_token=token,
    )
    _cross_validate(scenario)
    return scenario


def load_scenario_file(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as f:
        return load_scenario(f.read())


def _cross_validate(scenario: Scenario):
    from .commands import validate_payload  # late import: commands needs Envelope

    for i, stage in enumerate(scenario.stages):
        if stage.tick >= scenario.duration_ticks:
            raise _err(f"stages[{i}].tick", "beyond run duration")
    for s in scenario.struts:
        mode = scenario.controller.modes[s.id]
        if mode.kind is ModeKind.FORCE_HOLD:
            lo, hi = scenario.envelope.force_setpoint_kn
            if not lo <= mode.setpoint <= hi:
                raise _err(f"controller.modes.{s.id}",
                           f"setpoint {mode.setpoint} outside envelope [{lo}, {hi}]")
    for i, sc in enumerate(scenario.command_script):
        reason = validate_payload(sc.payload, scenario.strut_ids(), scenario.envelope)
        if reason is not None:
            raise _err(f"command_script[{i}]", reason)
