"""Deterministic fixed-timestep orchestrator.

Each tick runs a fixed phase order, and the order is normative (changing it
changes results):

    1. apply queued operator commands (scripted first, then arrivals in order)
    2. apply scheduled stages, lock failures, ambient temperature
    3. plant advances one step under last tick's actuation
    4. sensors sample and readings are validated
    5. alarms, lock loads and pump duty evaluate on validated measurements
    6. supervisor + PID + feed-forward compute the next actuation (0 if locked)
    7. one telemetry record is emitted

Sim time is decoupled from the wall clock; (scenario, seed) fully determines
the telemetry byte stream.  Commands enter only at tick boundaries through a
single queue that is safe for concurrent producers.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field, replace

from .control import (
    Action,
    ControlFaultError,
    ControlMode,
    ControllerState,
    ModeKind,
    control_step,
)
from .plant import (
    PlantState,
    SoilParams,
    StageItem,
    apply_stage,
    initial_state,
    solve_equilibrium,
    step_plant,
    strut_reaction,
    thermal_elongation,
)
from .rng import StreamBank
from .safety import (
    AlarmLevel,
    AlarmState,
    AllLocksFailedError,
    LockAssembly,
    PumpDutyWatch,
    check_lock_capacity,
    evaluate_alarm,
    lock_loads,
)
from .scenario import Scenario, ScriptedCommand, StrutConfig
from .sensors import Reading, ReadingStatus, SensorKind, apply_fault, sample, validate
from .telemetry import AlarmEvent, RunWriter, StrutChannels, TelemetryRecord, TelemetryStore

RunStatus = str  # "running" | "finished" | "failed"


@dataclass
class StrutRuntime:
    cfg: StrutConfig
    soil: SoilParams
    plant: PlantState
    ctrl: ControllerState
    mode: ControlMode
    locks: LockAssembly
    duty: PumpDutyWatch
    command_mm_per_s: float = 0.0  # actuation applied on the next plant step
    readings: dict[SensorKind, Reading] = field(default_factory=dict)
    last_good: dict[SensorKind, Reading] = field(default_factory=dict)
    validated: dict[SensorKind, Reading] = field(default_factory=dict)
    lock_loads_kn: list[float] = field(default_factory=list)
    fault_hold: bool = False
    overloaded: tuple[int, ...] = ()
    # summary accumulators
    max_abs_force_error_kn: float = 0.0
    max_wall_disp_mm: float = 0.0
    last_tick_outside_band: int = -1


class Engine:
    """One simulation run; strictly single-threaded stepping, thread-safe enqueue."""

    def __init__(self, scenario: Scenario, writer: RunWriter | None = None):
        self.scenario = scenario
        self.writer = writer
        self.tick = 0  # ticks executed so far == next tick to execute
        self.status: RunStatus = "running"
        self.estop = False
        self.terminal_fault: str | None = None
        self.streams = StreamBank(scenario.seed)
        self.store = TelemetryStore(scenario.strut_ids(), scenario.locks.n_locks)
        self.events: list[dict] = []
        self.command_log: list[dict] = []

        self._queue: list[dict] = []
        self._qlock = threading.Lock()
        self._accept_tick = 0
        self._ramps: list[tuple[int, float, int]] = []  # (start, delta_c, over_ticks)
        self._scripted: dict[int, list[ScriptedCommand]] = {}
        for i, sc in enumerate(scenario.command_script):
            payload = dict(sc.payload)
            payload.setdefault("client_id", "script")
            payload.setdefault("client_seq", i + 1)
            self._scripted.setdefault(sc.tick, []).append(ScriptedCommand(sc.tick, payload))

        ambient0 = scenario.ambient_at(0)
        self.struts: dict[str, StrutRuntime] = {}
        for cfg in scenario.struts:
            capacity = scenario.locks.capacity_kn
            if capacity is None:
                capacity = 0.55 * cfg.strut.design_force_kn
            self.struts[cfg.id] = StrutRuntime(
                cfg=cfg,
                soil=cfg.soil,
                plant=initial_state(cfg.strut, cfg.soil, cfg.prestress_kn, ambient0),
                ctrl=ControllerState(ff_ref_temp_c=ambient0),
                mode=scenario.controller.modes[cfg.id],
                locks=LockAssembly(n_locks=scenario.locks.n_locks, capacity_kn=capacity),
                duty=PumpDutyWatch(),
            )
        self.alarm_states: dict[str, AlarmState] = {
            t.channel: AlarmState(channel=t.channel) for t in scenario.thresholds
        }
        self.thresholds = {t.channel: t for t in scenario.thresholds}

    # ------------------------------------------------------------------ queue

    def enqueue(self, payload: dict) -> int:
        """Queue a validated operator command; returns the tick it will apply at."""
        with self._qlock:
            if self.status != "running":
                raise RuntimeError(f"run is {self.status}")
            applied = self._accept_tick
            self._queue.append(payload)
            return applied

    def schedule(self, tick: int, payload: dict) -> None:
        """Pre-schedule a command (replay path); call before stepping reaches the tick.

        Scenario-scripted commands were inserted first at construction, so a
        replayed external command lands after them at the same tick, matching
        the live drain order.
        """
        if tick < self.tick:
            raise ValueError(f"tick {tick} already executed")
        self._scripted.setdefault(tick, []).append(ScriptedCommand(tick, payload))

    def _drain(self, tick: int) -> list[dict]:
        scripted = [sc.payload for sc in self._scripted.get(tick, [])]
        with self._qlock:
            external = self._queue
            self._queue = []
            self._accept_tick = tick + 1
        return scripted + external

    # ------------------------------------------------------------- commands

    def _apply_command(self, payload: dict, tick: int, tags: list[str],
                       alarm_events: list[AlarmEvent]):
        kind = payload["kind"]
        client = payload.get("client_id", "anon")
        seq = payload.get("client_seq", 0)
        sid = payload.get("strut")

        if kind == "e_stop":
            if not self.estop:
                self.estop = True
                self._event(tick, "estop_engaged", {})
                tags.append("e_stop")
        elif kind == "reset":
            if self.estop:
                self.estop = False
                self._event(tick, "estop_released", {})
                tags.append("reset")
        elif kind == "set_force_setpoint":
            rt = self.struts[sid]
            new_sp = float(payload["value"])
            if rt.mode.kind is ModeKind.FORCE_HOLD and rt.mode.setpoint > 0:
                deadband = rt.mode.deadband / rt.mode.setpoint * new_sp
            else:
                deadband = 0.05 * new_sp
            rt.mode = ControlMode(ModeKind.FORCE_HOLD, setpoint=new_sp, deadband=deadband)
        elif kind == "set_displacement_setpoint":
            rt = self.struts[sid]
            new_sp = float(payload["value"])
            deadband = rt.mode.deadband if rt.mode.kind is ModeKind.DISPLACEMENT_HOLD else 0.5
            rt.mode = ControlMode(ModeKind.DISPLACEMENT_HOLD, setpoint=new_sp, deadband=deadband)
        elif kind == "set_mode":
            rt = self.struts[sid]
            rt.mode = self._mode_from_payload(rt, payload)
        elif kind == "jog_jack":
            rt = self.struts[sid]
            rt.mode = ControlMode(ModeKind.MANUAL, jog_rate_mm_per_s=float(payload["value"]))
        elif kind == "ack_alarm":
            channel = payload["channel"]
            state = self.alarm_states.get(channel)
            if state is not None and state.level is AlarmLevel.ALARM and not state.acknowledged:
                new = replace(state, acknowledged=True)
                self.alarm_states[channel] = new
                alarm_events.append(self._alarm_event(new))
                self._event(tick, "alarm_acknowledged",
                            {"channel": channel, "operator": str(client)})
        elif kind == "inject_stage":
            targets = [sid] if sid else list(self.struts)
            for target in targets:
                self._apply_stage_to(target, float(payload["value"]), tick, tags)
        elif kind == "inject_temp_ramp":
            self._ramps.append((tick, float(payload["value"]),
                                int(payload.get("over_ticks", 0))))
            self._event(tick, "temp_ramp_injected",
                        {"delta_c": float(payload["value"]),
                         "over_ticks": int(payload.get("over_ticks", 0))})
        else:
            raise ValueError(f"unknown command kind {kind!r}")

        tags.append(f"command_applied:{client}:{seq}:{kind}")
        if client != "script":
            # scripted commands replay from the scenario itself; logging them
            # would double-apply on replay
            self.command_log.append({"applied_tick": tick, "command": payload})

    def _mode_from_payload(self, rt: StrutRuntime, payload: dict) -> ControlMode:
        mode_s = payload["mode"]
        kind = ModeKind(mode_s)
        design = rt.cfg.strut.design_force_kn
        if kind is ModeKind.FORCE_HOLD:
            sp = float(payload.get("value", design))
            return ControlMode(kind, setpoint=sp, deadband=0.05 * sp)
        if kind is ModeKind.DISPLACEMENT_HOLD:
            sp = float(payload.get("value", rt.plant.wall_disp_mm))
            return ControlMode(kind, setpoint=sp, deadband=0.5)
        if kind is ModeKind.MANUAL:
            return ControlMode(kind, jog_rate_mm_per_s=float(payload.get("value", 0.0)))
        return ControlMode(ModeKind.LOCKED)

    def _apply_stage_to(self, sid: str, increment_kn: float, tick: int, tags: list[str]):
        rt = self.struts[sid]
        stage = StageItem(index=rt.plant.stage_index + 1, increment_kn=increment_kn)
        rt.plant, rt.soil = apply_stage(rt.plant, rt.soil, stage)
        self._event(tick, "stage_applied", {"strut": sid, "increment_kn": increment_kn,
                                            "stage_index": stage.index})
        tags.append(f"stage_applied:{sid}:{increment_kn:g}")

    # ------------------------------------------------------------- stepping

    def ambient_at(self, tick: int) -> float:
        base = self.scenario.ambient_at(tick)
        for start, delta, over in self._ramps:
            if tick >= start:
                frac = 1.0 if over <= 0 else min(1.0, (tick - start) / over)
                base += delta * frac
        return base

    def step(self) -> TelemetryRecord:
        if self.status != "running":
            raise RuntimeError(f"cannot step: run is {self.status}")
        sc = self.scenario
        t = self.tick
        dt = sc.dt_s
        tags: list[str] = []
        alarm_events: list[AlarmEvent] = []

        # 1. operator commands
        for payload in self._drain(t):
            self._apply_command(payload, t, tags, alarm_events)

        # 2. scheduled items
        for stage in sc.stages:
            if stage.tick == t:
                for sid in stage.strut_ids:
                    self._apply_stage_to(sid, stage.increment_kn, t, tags)
        for lf in sc.lock_failures:
            if lf.tick == t:
                rt = self.struts[lf.strut_id]
                try:
                    rt.locks = rt.locks.fail_lock(lf.lock_index)
                    self._event(t, "lock_failed", {"strut": lf.strut_id, "lock": lf.lock_index})
                    tags.append(f"lock_failed:{lf.strut_id}:{lf.lock_index}")
                except AllLocksFailedError:
                    self.terminal_fault = f"all_locks_failed:{lf.strut_id}"
                    self._event(t, "terminal_fault", {"reason": self.terminal_fault})
                    tags.append(f"terminal_fault:{self.terminal_fault}")
        ambient = self.ambient_at(t)

        # 3. plant advances under last tick's actuation
        if sc.coupling is None:
            for rt in self.struts.values():
                rt.plant = step_plant(rt.plant, rt.cfg.strut, rt.soil, dt,
                                      rt.command_mm_per_s, ambient)
        else:
            self._step_coupled(dt, ambient)

        # 4. sensors
        for sid, rt in self.struts.items():
            for kind in SensorKind:
                spec = sc.sensors[sid][kind]
                channel = f"{sid}/{kind.value}"
                if t % spec.period_ticks == 0:
                    truth = {
                        SensorKind.FORCE: rt.plant.strut_force_kn,
                        SensorKind.DISPLACEMENT: rt.plant.wall_disp_mm,
                        SensorKind.TEMPERATURE: rt.plant.temp_c,
                    }[kind]
                    reading = sample(spec, channel, truth, t, self.streams)
                    faulted = False
                    for sf in sc.faults:
                        if sf.strut_id == sid and sf.sensor is kind and sf.fault.active_at(t):
                            last_good = rt.last_good.get(kind, reading)
                            reading = apply_fault(reading, sf.fault, last_good, dt)
                            faulted = True
                            tags.append(f"fault_active:{channel}:{sf.fault.kind.value}")
                    rt.readings[kind] = reading
                    if not faulted and reading.status is ReadingStatus.OK:
                        rt.last_good[kind] = reading
                if kind in rt.readings:
                    rt.validated[kind] = validate(
                        rt.readings[kind], sc.controller.staleness_limit_ticks, t)

        # 5. safety: alarms, lock loads, pump duty
        for sid, rt in self.struts.items():
            duty_value = rt.duty.update(rt.command_mm_per_s, dt)
            for channel, th in self.thresholds.items():
                if not channel.startswith(sid + "/"):
                    continue
                kind_name = channel.split("/")[1]
                if kind_name == "pump_duty":
                    value = duty_value
                else:
                    reading = rt.validated.get(SensorKind(kind_name))
                    if reading is None or reading.status is not ReadingStatus.OK:
                        continue  # never alarm on unvetted data
                    value = reading.value
                prev = self.alarm_states[channel]
                new = evaluate_alarm(prev, value, th, t)
                if new is not prev:
                    self.alarm_states[channel] = new
                    if (new.level, new.acknowledged) != (prev.level, prev.acknowledged):
                        alarm_events.append(self._alarm_event(new))
                        self._event(t, "alarm", {
                            "channel": channel, "level": new.level.value,
                            "latched": new.latched, "acknowledged": new.acknowledged,
                            "raised_tick": new.raised_tick,
                        })
            rt.lock_loads_kn = lock_loads(rt.plant.strut_force_kn, rt.locks)
            overloaded = tuple(check_lock_capacity(rt.lock_loads_kn, rt.locks.capacity_kn))
            if overloaded != rt.overloaded:
                if overloaded:
                    self._event(t, "lock_overload", {"strut": sid, "locks": list(overloaded)})
                    tags.append(f"lock_overload:{sid}:{','.join(map(str, overloaded))}")
                rt.overloaded = overloaded

        # 6. control computes next actuation
        retract_frac = sc.controller.retract_limit_fraction
        for sid, rt in self.struts.items():
            mode = ControlMode(ModeKind.LOCKED) if self.estop else rt.mode
            try:
                out = control_step(
                    sc.controller.gains, mode, rt.ctrl, rt.validated, rt.cfg.strut,
                    retract_frac * rt.cfg.strut.design_force_kn,
                    rt.plant.jack_ext_mm, dt,
                    ff_time_constant_s=sc.controller.ff_time_constant_s,
                )
            except ControlFaultError as e:
                rt.mode = ControlMode(ModeKind.LOCKED)
                rt.command_mm_per_s = 0.0
                self._event(t, "control_fault", {"strut": sid, "reason": str(e)})
                tags.append(f"control_fault:{sid}")
                continue
            rt.ctrl = out.state
            rt.command_mm_per_s = out.command_mm_per_s
            if out.decision.fault is not None:
                if not rt.fault_hold:
                    self._event(t, "control_hold", {"strut": sid, "reason": out.decision.fault})
                    tags.append(f"control_hold:{sid}:{out.decision.fault}")
                rt.fault_hold = True
            else:
                rt.fault_hold = False
            if out.decision.action is Action.AUTO_RETRACT:
                tags.append(f"auto_retract:{sid}")

        # 7. telemetry record
        rec = self._make_record(t, tuple(alarm_events), tuple(tags))
        self.store.record(rec)
        if self.writer is not None:
            self.writer.write_record(rec)

        with self._qlock:
            self.tick = t + 1
        if self.terminal_fault is not None:
            self.status = "failed"
        elif self.tick >= sc.duration_ticks:
            self.status = "finished"
        return rec

    def _step_coupled(self, dt: float, ambient: float):
        # Same update as step_plant, but wall targets are blended through the
        # symmetric influence matrix before the first-order relaxation.
        sids = list(self.struts)
        updated = []
        for rt in self.struts.values():
            strut = rt.cfg.strut
            limit = strut.jack_rate_limit_mm_per_s
            rate = min(max(rt.command_mm_per_s, -limit), limit)
            lo, hi = strut.jack_stroke_mm
            jack = min(max(rt.plant.jack_ext_mm + rate * dt, lo), hi)
            if strut.temp_time_constant_s == 0.0:
                temp = ambient
            else:
                temp = rt.plant.temp_c + (ambient - rt.plant.temp_c) * (
                    1.0 - math.exp(-dt / strut.temp_time_constant_s))
            w_eq, _ = solve_equilibrium(strut, rt.soil, jack, temp - rt.plant.ref_temp_c)
            updated.append((rt, jack, temp, w_eq))
        coupling = self.scenario.coupling
        for i, (rt, jack, temp, _) in enumerate(updated):
            target = sum(coupling[i][j] * updated[j][3] for j in range(len(sids)))
            wall = rt.plant.wall_disp_mm + (target - rt.plant.wall_disp_mm) * (
                1.0 - math.exp(-dt / rt.soil.wall_time_constant_s))
            ext = jack + thermal_elongation(rt.cfg.strut, temp - rt.plant.ref_temp_c)
            force = strut_reaction(rt.cfg.strut, wall, ext)
            rt.plant = PlantState(wall_disp_mm=wall, jack_ext_mm=jack, temp_c=temp,
                                  ref_temp_c=rt.plant.ref_temp_c, strut_force_kn=force,
                                  stage_index=rt.plant.stage_index)

    def _make_record(self, tick: int, alarm_events, tags) -> TelemetryRecord:
        struts: dict[str, StrutChannels] = {}
        for sid, rt in self.struts.items():
            force_r = rt.validated.get(SensorKind.FORCE)
            disp_r = rt.validated.get(SensorKind.DISPLACEMENT)
            measured_force = force_r.value if force_r else rt.plant.strut_force_kn
            measured_disp = disp_r.value if disp_r else rt.plant.wall_disp_mm
            if rt.mode.kind is ModeKind.FORCE_HOLD:
                error = rt.mode.setpoint - measured_force
            elif rt.mode.kind is ModeKind.DISPLACEMENT_HOLD:
                error = rt.mode.setpoint - measured_disp
            else:
                error = 0.0
            struts[sid] = StrutChannels(
                true_force_kn=rt.plant.strut_force_kn,
                measured_force_kn=measured_force,
                true_disp_mm=rt.plant.wall_disp_mm,
                measured_disp_mm=measured_disp,
                temp_c=rt.plant.temp_c,
                jack_ext_mm=rt.plant.jack_ext_mm,
                command_mm_per_s=rt.command_mm_per_s,
                mode="locked" if self.estop else rt.mode.kind.value,
                error_kn=error,
                lock_loads_kn=tuple(rt.lock_loads_kn),
            )
            # summary accumulators
            if rt.mode.kind is ModeKind.FORCE_HOLD:
                true_err = abs(rt.plant.strut_force_kn - rt.mode.setpoint)
                rt.max_abs_force_error_kn = max(rt.max_abs_force_error_kn, true_err)
                if abs(measured_force - rt.mode.setpoint) > rt.mode.deadband:
                    rt.last_tick_outside_band = tick
            rt.max_wall_disp_mm = max(rt.max_wall_disp_mm, rt.plant.wall_disp_mm)
        return TelemetryRecord(tick=tick, struts=struts,
                               alarm_events=alarm_events, event_tags=tags)

    def _alarm_event(self, state: AlarmState) -> AlarmEvent:
        return AlarmEvent(channel=state.channel, level=state.level.value,
                          latched=state.latched, acknowledged=state.acknowledged,
                          raised_tick=state.raised_tick)

    def _event(self, tick: int, kind: str, detail: dict):
        event = {"tick": tick, "kind": kind, **detail}
        self.events.append(event)
        if self.writer is not None:
            self.writer.write_event(event)

    # ------------------------------------------------------------- queries

    def snapshot(self) -> dict:
        """Pure projection of the current state; canonical field set, no mutation."""
        struts = {}
        for sid, rt in self.struts.items():
            force_r = rt.validated.get(SensorKind.FORCE)
            disp_r = rt.validated.get(SensorKind.DISPLACEMENT)
            temp_r = rt.validated.get(SensorKind.TEMPERATURE)
            struts[sid] = {
                "true_force_kn": rt.plant.strut_force_kn,
                "measured_force_kn": force_r.value if force_r else rt.plant.strut_force_kn,
                "force_status": force_r.status.value if force_r else "ok",
                "true_disp_mm": rt.plant.wall_disp_mm,
                "measured_disp_mm": disp_r.value if disp_r else rt.plant.wall_disp_mm,
                "temp_c": temp_r.value if temp_r else rt.plant.temp_c,
                "jack_ext_mm": rt.plant.jack_ext_mm,
                "command_mm_per_s": rt.command_mm_per_s,
                "mode": "locked" if self.estop else rt.mode.kind.value,
                "setpoint": rt.mode.setpoint,
                "deadband": rt.mode.deadband,
                "stage_index": rt.plant.stage_index,
                "lock_loads_kn": list(rt.lock_loads_kn),
                "lock_cycles": list(rt.locks.cycle_counts),
                "lock_failed": sorted(rt.locks.failed),
            }
        return {
            "v": 1,
            "type": "snapshot",
            "tick": self.tick,
            "status": self.status,
            "estop": self.estop,
            "struts": struts,
            "alarms": [
                {
                    "channel": s.channel,
                    "level": s.level.value,
                    "latched": s.latched,
                    "acknowledged": s.acknowledged,
                    "raised_tick": s.raised_tick,
                }
                for s in self.alarm_states.values()
            ],
        }

    def summary(self) -> dict:
        alarm_counts: dict[str, int] = {}
        for ev in self.events:
            if ev["kind"] == "alarm" and ev["level"] == "alarm" and ev["raised_tick"] == ev["tick"]:
                alarm_counts[ev["channel"]] = alarm_counts.get(ev["channel"], 0) + 1
        struts = {}
        for sid, rt in self.struts.items():
            settled = (rt.last_tick_outside_band < self.tick - 1
                       if rt.mode.kind is ModeKind.FORCE_HOLD else None)
            struts[sid] = {
                "final_force_kn": rt.plant.strut_force_kn,
                "final_disp_mm": rt.plant.wall_disp_mm,
                "max_abs_force_error_kn": rt.max_abs_force_error_kn,
                "max_wall_disp_mm": rt.max_wall_disp_mm,
                "settling_tick": rt.last_tick_outside_band + 1 if settled else None,
                "jack_ext_mm": rt.plant.jack_ext_mm,
                "lock_cycles": list(rt.locks.cycle_counts),
            }
        return {
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "ticks": self.tick,
            "status": self.status,
            "terminal_fault": self.terminal_fault,
            "alarm_raise_counts": alarm_counts,
            "struts": struts,
        }

    # ------------------------------------------------------------- run loop

    def run(self, pace_s: float = 0.0, on_tick=None) -> dict:
        """Step to completion; optional wall-clock pacing and per-tick callback."""
        while self.status == "running":
            rec = self.step()
            if on_tick is not None:
                on_tick(self, rec)
            if pace_s > 0:
                time.sleep(pace_s)
        summary = self.summary()
        if self.writer is not None:
            self.writer.finalize(summary)
        return summary


def run_scenario(scenario: Scenario, out_dir=None, pace_s: float = 0.0, on_tick=None
                 ) -> tuple[Engine, dict]:
    """Load-and-go convenience: build an engine, run it, return (engine, summary)."""
    writer = None
    if out_dir is not None:
        writer = RunWriter(out_dir, scenario.strut_ids(), scenario.locks.n_locks)
    engine = Engine(scenario, writer=writer)
    summary = engine.run(pace_s=pace_s, on_tick=on_tick)
    return engine, summary
