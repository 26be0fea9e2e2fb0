"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion.  Criteria 1-7 are headless; the console round-trip (criterion 8)
lives in the frontend's own test suite and drives these same endpoints.
"""

import hashlib
import time
from pathlib import Path

import numpy as np
import pytest

from strutservo.cli import main as cli_main
from strutservo.control import ControllerState, PidGains, pid_step
from strutservo.engine import run_scenario
from strutservo.gateway import LiveSession, connect_tcp
from strutservo.plant import (
    SoilParams,
    StrutParams,
    mobilized_load,
    solve_equilibrium,
    strut_reaction,
)
from strutservo.safety import LockAssembly, check_lock_capacity, lock_loads
from strutservo.scenario import load_scenario, load_scenario_file

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
F_DESIGN = 2250.0
DEADBAND = (2137.5, 2362.5)  # +-5%


def report(num, text):
    print(f"\n[ACCEPTANCE {num}] PASS - {text}")


def strut_series(engine, field, start, end):
    return [getattr(r.struts["S1"], field) for r in engine.store.query(start, end)]


class TestCriterion1ThermalCompensation:
    def test_feedforward_holds_force_through_ramp(self):
        scenario = load_scenario_file(SCENARIOS / "thermal-ramp.yaml")
        t0 = time.perf_counter()
        engine, summary = run_scenario(scenario)
        runtime = time.perf_counter() - t0
        errors = [abs(f - F_DESIGN)
                  for f in strut_series(engine, "true_force_kn", 701, 1200)]
        assert max(errors) <= 22.5, f"worst error {max(errors):.2f} kN"
        assert runtime < 1.0, f"runtime {runtime:.2f}s"

        uncontrolled = load_scenario_file(SCENARIOS / "thermal-ramp-uncontrolled.yaml")
        engine2, _ = run_scenario(uncontrolled)
        final = strut_series(engine2, "true_force_kn", 1199, 1200)[0]
        assert final == pytest.approx(2430.0, abs=1.0), f"uncontrolled final {final:.2f}"
        report(1, f"thermal ramp held to {max(errors):.1f} kN (<=22.5); "
                  f"uncontrolled drifted to {final:.1f} kN (2430+-1); runtime {runtime * 1e3:.0f} ms")


class TestCriterion2EquilibriumOracle:
    def test_closed_form_vs_bisection_1000_draws(self):
        rng = np.random.default_rng(424242)
        worst_w = worst_f = 0.0
        for _ in range(1000):
            k_soil = rng.uniform(10.0, 1000.0)
            k_strut = rng.uniform(10.0, 1000.0)
            q0 = rng.uniform(100.0, 5000.0)
            q_min = rng.uniform(0.0, 0.5 * q0)
            q_max = q0 + rng.uniform(50.0, 3000.0)
            u = rng.uniform(-50.0, 150.0)
            dtc = rng.uniform(-20.0, 30.0)
            strut = StrutParams(axial_stiffness_kn_per_mm=k_strut)
            soil = SoilParams(driving_load_kn=q0, soil_stiffness_kn_per_mm=k_soil,
                              load_bounds_kn=(q_min, q_max), wall_time_constant_s=60.0)
            w, f = solve_equilibrium(strut, soil, u, dtc)
            w_o, f_o = self._bisect(strut, soil, u, dtc)
            dw = abs(w - w_o) / max(1e-7, abs(w_o))
            df = abs(f - f_o) / max(1e-6, abs(f_o))
            worst_w, worst_f = max(worst_w, dw), max(worst_f, df)
            assert dw <= 1e-6 and df <= 1e-6
        report(2, f"1000/1000 oracle draws agree; worst rel err w={worst_w:.2e}, F={worst_f:.2e}")

    @staticmethod
    def _bisect(strut, soil, u, dtc, lo=-1e3, hi=1e3):
        ext = u + strut.thermal_coeff_per_c * strut.length_mm * dtc

        def residual(w):
            return mobilized_load(soil, w) - strut_reaction(strut, w, ext)

        assert residual(lo) >= 0.0 >= residual(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if residual(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, abs(mid)):
                break
        w = 0.5 * (lo + hi)
        return w, strut_reaction(strut, w, ext)


class TestCriterion3LowForceAutoExtension:
    def test_recovery_into_deadband_without_chatter(self):
        engine, _ = run_scenario(load_scenario_file(SCENARIOS / "low-force-recovery.yaml"))
        measured = strut_series(engine, "measured_force_kn", 0, 1200)
        inside = [DEADBAND[0] <= f <= DEADBAND[1] for f in measured]
        entry = inside.index(True)
        assert entry <= 300, f"entered deadband at tick {entry}"
        assert all(inside[700:]), "left the deadband during the final 500 ticks"
        commands = strut_series(engine, "command_mm_per_s", 700, 1200)
        assert all(c == 0.0 for c in commands), "nonzero command inside the deadband"
        report(3, f"entered deadband at tick {entry} (<=300); final 500 ticks inside "
                  "with command exactly 0")


class TestCriterion4HighForceProtection:
    def test_auto_retract_and_single_latched_alarm(self):
        engine, _ = run_scenario(load_scenario_file(SCENARIOS / "high-force-step.yaml"))
        limit = 1.2 * F_DESIGN
        measured = strut_series(engine, "measured_force_kn", 0, 600)
        runs, current = [], 0
        for above in (f > limit for f in measured):
            if above:
                current += 1
            elif current:
                runs.append(current)
                current = 0
        if current:
            runs.append(current)
        assert runs, "force never exceeded the hard limit"
        assert max(runs) <= 10, f"excursion lasted {max(runs)} ticks"

        alarm_events = [e for e in engine.events
                        if e["kind"] == "alarm" and e["channel"] == "S1/force/high"]
        raises = [e for e in alarm_events
                  if e["level"] == "alarm" and e["raised_tick"] == e["tick"]]
        assert len(raises) == 1, f"{len(raises)} raises for one excursion episode"

        acks = [e for e in engine.events if e["kind"] == "alarm_acknowledged"]
        assert len(acks) == 1
        clears = [e for e in alarm_events if e["level"] in ("normal", "warning")
                  and e["tick"] > raises[0]["tick"]]
        assert clears, "alarm never cleared"
        clear_tick = clears[0]["tick"]
        assert clear_tick >= acks[0]["tick"], "cleared before acknowledgment"
        assert measured[clear_tick] < limit - 50.0, "cleared before receding"
        report(4, f"excursions above {limit:.0f} kN lasted {runs} tick(s) (<=10); "
                  f"one latched raise at {raises[0]['tick']}, cleared at {clear_tick} "
                  "after recede + ack")


class TestCriterion5DeterminismAndReplay:
    def test_three_runs_hash_equal(self, tmp_path):
        digests = []
        for i in range(3):
            out = tmp_path / f"run{i}"
            code = cli_main(["run", str(SCENARIOS / "thermal-ramp.yaml"), "--out", str(out)])
            assert code == 0
            data = (out / "thermal-ramp-2026" / "run.csv").read_bytes()
            digests.append(hashlib.sha256(data).hexdigest())
        assert len(set(digests)) == 1
        report(5, f"3 runs hash-equal ({digests[0][:12]}...)")

    def test_interactive_session_replays_byte_identical(self, tmp_path):
        doc = """
meta: {name: session}
duration_ticks: 240
seed: 42
struts:
  - id: S1
    strut: {axial_stiffness_kn_per_mm: 600.0}
    prestress_kn: 2200.0
stages:
  - {tick: 30, increment_kn: 150}
temperature_profile: [[0, 18.0], [200, 22.0]]
service: {auth_token: local-dev-token}
"""
        scenario_path = tmp_path / "session.yaml"
        scenario_path.write_text(doc)
        scenario = load_scenario(doc)

        live_dir = tmp_path / "live"
        log_path = tmp_path / "commands.log"
        session = LiveSession(scenario, out_dir=live_dir,
                              command_log_path=log_path).start()
        try:
            sock, send, recv, _ = connect_tcp(session.tcp_port, "local-dev-token",
                                              "operator-1", subscribe=())
            session.advance(40)
            send({"v": 1, "type": "command", "client_id": "operator-1", "client_seq": 1,
                  "kind": "set_force_setpoint", "strut": "S1", "value": 2350.0})
            assert recv()["accepted"]
            session.advance(60)
            send({"v": 1, "type": "command", "client_id": "operator-1", "client_seq": 2,
                  "kind": "inject_temp_ramp", "value": 4.0, "over_ticks": 50})
            assert recv()["accepted"]
            session.advance(40)
            send({"v": 1, "type": "command", "client_id": "operator-1", "client_seq": 3,
                  "kind": "e_stop"})
            assert recv()["accepted"]
            session.advance(20)
            send({"v": 1, "type": "command", "client_id": "operator-1", "client_seq": 4,
                  "kind": "reset"})
            assert recv()["accepted"]
            while session.engine.status == "running":
                session.advance(50)
            session.finalize()
            sock.close()
        finally:
            session.stop()

        code = cli_main(["replay", str(scenario_path), str(log_path),
                         "--out", str(tmp_path / "replayed")])
        assert code == 0
        live = (live_dir / "run.csv").read_bytes()
        replayed = (tmp_path / "replayed" / "session-42-replay" / "run.csv").read_bytes()
        assert live == replayed
        report(5, "interactive session (4 commands over TCP) replayed byte-for-byte")


class TestCriterion6TripleLockRedundancy:
    def test_redundancy_quantified(self):
        capacity = 0.55 * F_DESIGN  # 1237.5 kN
        three = lock_loads(F_DESIGN, LockAssembly(n_locks=3).fail_lock(0))
        assert three == [0.0, 1125.0, 1125.0]
        assert check_lock_capacity(three, capacity) == []

        two = lock_loads(F_DESIGN, LockAssembly(n_locks=2).fail_lock(0))
        assert two == [0.0, 2250.0]
        assert check_lock_capacity(two, capacity) == [1]

        import itertools
        for n in (2, 3):
            for r in range(n):
                for mask in itertools.combinations(range(n), r):
                    asm = LockAssembly(n_locks=n)
                    for i in mask:
                        asm = asm.fail_lock(i)
                    for force in (F_DESIGN, 0.0, 1234.567, 1.0):
                        assert sum(lock_loads(force, asm)) == force
        report(6, "single failure: 3-lock ok at 1125<=1237.5 kN, 2-lock overload at "
                  "2250>1237.5 kN; load sums exact over all masks")


class TestCriterion7AntiWindupAndSensorFault:
    def test_integral_bounded_over_1e4_random_steps(self):
        gains = PidGains(kp=0.002, ki=0.0002, kd=0.0, integral_limit=0.3, output_limit=0.5)
        state = ControllerState()
        rng = np.random.default_rng(777)
        worst = 0.0
        for error in rng.uniform(-5e4, 5e4, size=10_000):
            _, state = pid_step(gains, state, float(error), 1.0)
            contribution = abs(gains.ki * state.integral)
            worst = max(worst, contribution)
            assert contribution <= gains.integral_limit + 1e-12
        report("7a", f"integral contribution <= {gains.integral_limit} mm/s over 1e4 "
                     f"random steps (worst {worst:.4f})")

    def test_stuck_sensor_flagged_and_commands_zeroed(self):
        scenario = load_scenario_file(SCENARIOS / "sensor-fault.yaml")
        engine, _ = run_scenario(scenario)
        limit = scenario.controller.staleness_limit_ticks
        recs = engine.store.query(0, 400)
        flagged = [r.tick for r in recs
                   if any(t.startswith("control_hold:S1:measurement_stale")
                          for t in r.event_tags)]
        assert flagged, "stuck sensor never flagged"
        # reading freezes holding the tick-99 sample; flag must land within the limit
        assert flagged[0] <= 99 + limit + 1
        invalid = range(flagged[0], 161)
        assert all(recs[t].struts["S1"].command_mm_per_s == 0.0 for t in invalid)
        # the controller was not idle by coincidence: it acts once data is fresh
        assert any(r.struts["S1"].command_mm_per_s != 0.0
                   for r in recs[161:200])
        report("7b", f"stuck sensor flagged at tick {flagged[0]} "
                     f"(limit {limit} past the last fresh sample at 99); zero commands "
                     "while invalid, regulation resumed after")


class TestDefaultScenarioSafetyNet:
    """Not a numbered criterion: the default-parameter loop is stable."""

    def test_default_gains_stable_on_default_plant(self):
        engine, summary = run_scenario(load_scenario("""
meta: {name: defaults}
duration_ticks: 900
seed: 5
struts: [{id: S1}]
stages: [{tick: 100, increment_kn: 300}]
temperature_profile: [[0, 20.0], [400, 26.0]]
"""))
        final = summary["struts"]["S1"]["final_force_kn"]
        assert summary["status"] == "finished"
        assert abs(final - 2250.0) <= 112.5  # settled inside the deadband
