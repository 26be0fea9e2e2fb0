#!/usr/bin/env python3
"""The two automatic interventions: extend on low force, retract on high force.

Low side: a strut locked off at 80% of design force is jacked back into the
+-5% deadband, where the command goes exactly to zero.  High side: a stage
step the weak PID cannot absorb crosses the 1.2x hard limit, triggering
full-rate auto-retract and a latched alarm that clears only after recession
plus operator acknowledgment.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from strutservo.engine import run_scenario
from strutservo.scenario import load_scenario_file

HERE = Path(__file__).resolve().parent
SCENARIOS = HERE.parent / "scenarios"
OUT = HERE / "out"
OUT.mkdir(exist_ok=True)

print("== Low-force auto-extension")
low, low_summary = run_scenario(load_scenario_file(SCENARIOS / "low-force-recovery.yaml"))
recs = low.store.query(0, 1200)
f = [r.struts["S1"].measured_force_kn for r in recs]
inside = [2137.5 <= x <= 2362.5 for x in f]
print(f"   start {f[0]:.0f} kN, first tick inside the deadband: {inside.index(True)}")
print(f"   settling tick (stayed inside from here on): "
      f"{low_summary['struts']['S1']['settling_tick']}")
print(f"   final jack extension {low_summary['struts']['S1']['jack_ext_mm']:+.2f} mm")

print("\n== High-force protection")
high, _ = run_scenario(load_scenario_file(SCENARIOS / "high-force-step.yaml"))
hrecs = high.store.query(0, 600)
hf = [r.struts["S1"].measured_force_kn for r in hrecs]
retracts = [r.tick for r in hrecs if any(t.startswith("auto_retract") for t in r.event_tags)]
print(f"   peak force {max(hf):.0f} kN (hard limit 2700)")
print(f"   auto-retract ticks: {retracts[:8]}{'...' if len(retracts) > 8 else ''}")
for e in high.events:
    if e["kind"] == "alarm" and e["channel"] == "S1/force/high":
        print(f"   tick {e['tick']:3d}: force/high -> {e['level']}"
              + (" (acknowledged)" if e["acknowledged"] else ""))
    if e["kind"] == "alarm_acknowledged":
        print(f"   tick {e['tick']:3d}: operator acknowledged {e['channel']}")

fig, axes = plt.subplots(1, 2, figsize=(12, 4))
axes[0].plot([r.tick for r in recs], f, lw=0.8)
axes[0].axhspan(2137.5, 2362.5, color="tab:green", alpha=0.15)
axes[0].set_title("low-force recovery")
axes[0].set_xlabel("tick")
axes[0].set_ylabel("measured force (kN)")
axes[1].plot([r.tick for r in hrecs], hf, lw=0.8)
axes[1].axhline(2700, color="tab:red", ls="--", label="hard retract limit")
axes[1].axhspan(2137.5, 2362.5, color="tab:green", alpha=0.15)
axes[1].set_title("high-force protection")
axes[1].set_xlabel("tick")
axes[1].legend()
fig.tight_layout()
fig.savefig(OUT / "recovery_and_protection.png", dpi=120)
print(f"\nplot saved to {OUT / 'recovery_and_protection.png'}")
