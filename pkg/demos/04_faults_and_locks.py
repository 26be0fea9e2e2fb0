#!/usr/bin/env python3
"""What the safety layer does when hardware lies or breaks.

Part 1: a stuck force sensor freezes mid-run while a stage step lands.  The
staleness check flags the dead reading within five ticks and the controller
refuses to act on it.  Part 2: the head assembly's lock redundancy, made
quantitative -- the same single failure that is routine for three locks
overloads a two-lock head.
"""

from pathlib import Path

from strutservo.engine import run_scenario
from strutservo.safety import LockAssembly, check_lock_capacity, lock_loads
from strutservo.scenario import load_scenario_file

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

print("== Stuck sensor, load step during the outage")
engine, _ = run_scenario(load_scenario_file(SCENARIOS / "sensor-fault.yaml"))
recs = engine.store.query(0, 400)
for t in (99, 100, 105, 120, 140, 160, 161, 162):
    r = recs[t].struts["S1"]
    tags = [x for x in recs[t].event_tags if "fault" in x or "hold" in x]
    print(f"   tick {t:3d}: measured {r.measured_force_kn:7.1f} kN, "
          f"true {r.true_force_kn:7.1f} kN, cmd {r.command_mm_per_s:+.3f}"
          + (f"   {tags}" if tags else ""))
print("   -> measured value frozen from tick 100; flagged stale at 105;")
print("      the tick-120 stage pushed the true force up, but no command was")
print("      issued on dead data; the retract pulse lands at tick 161.")

print("\n== Lock loads under single failures (design force 2250 kN)")
capacity = 0.55 * 2250.0
for n in (3, 2):
    asm = LockAssembly(n_locks=n, capacity_kn=capacity)
    healthy = lock_loads(2250.0, asm)
    failed = lock_loads(2250.0, asm.fail_lock(0))
    overloaded = check_lock_capacity(failed, capacity)
    verdict = "ok" if not overloaded else f"OVERLOAD on lock(s) {overloaded}"
    print(f"   {n}-lock head: healthy {healthy} kN")
    print(f"              lock 0 fails -> {failed} kN vs capacity {capacity:.1f}: {verdict}")
print("   -> the third lock is what turns a failure into a maintenance item")
print("      instead of an overload.")
