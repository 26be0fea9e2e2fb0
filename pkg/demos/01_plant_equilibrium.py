#!/usr/bin/env python3
"""The digital twin's spring pair, solved two ways.

The wall mobilizes less earth load as it yields into the pit; the strut pushes
back harder the more it is compressed.  The equilibrium force is where the two
laws cross.  This script walks the closed-form solution, cross-checks it with
plain bisection on the residual, then applies an excavation stage and a
temperature change to show how the operating point moves.
"""

from strutservo.plant import (
    SoilParams,
    StageItem,
    StrutParams,
    apply_stage,
    initial_state,
    mobilized_load,
    solve_equilibrium,
    strut_reaction,
    thermal_elongation,
)

strut = StrutParams(axial_stiffness_kn_per_mm=600.0)
soil = SoilParams(driving_load_kn=3000.0, soil_stiffness_kn_per_mm=200.0)

print("== Baseline: neutral jack, reference temperature")
w, f = solve_equilibrium(strut, soil, jack_ext_mm=0.0, delta_t_c=0.0)
print(f"   wall yield w = {w:.4f} mm, strut force F = {f:.2f} kN")
print(f"   soil check: Q(w) = 3000 - 200*w = {mobilized_load(soil, w):.2f} kN")

print("\n== The same root by bisection on Q(w) - F(w)")
lo, hi = -1e3, 1e3
for _ in range(100):
    mid = 0.5 * (lo + hi)
    if mobilized_load(soil, mid) - strut_reaction(strut, mid, 0.0) > 0:
        lo = mid
    else:
        hi = mid
print(f"   bisection: w = {0.5 * (lo + hi):.6f} mm (closed form said {w:.6f})")

print("\n== Jack extension stiffens the hold: u = +1 mm")
w1, f1 = solve_equilibrium(strut, soil, 1.0, 0.0)
print(f"   w = {w1:.4f} mm (wall pulled back), F = {f1:.2f} kN (+{f1 - f:.0f} kN)")

print("\n== A +10 degC afternoon, jack untouched")
dl = thermal_elongation(strut, 10.0)
w2, f2 = solve_equilibrium(strut, soil, 0.0, 10.0)
print(f"   free elongation {dl:.2f} mm -> F = {f2:.1f} kN "
      f"(uncompensated drift {(f2 - f) / 10:.1f} kN/degC)")

print("\n== Excavation stage: +500 kN of driving load")
state = initial_state(strut, soil, prestress_kn=2250.0, ambient_temp_c=20.0)
state, soil2 = apply_stage(state, soil, StageItem(index=1, increment_kn=500.0))
w3, f3 = solve_equilibrium(strut, soil2, 0.0, 0.0)
print(f"   new steady state: w = {w3:.4f} mm, F = {f3:.2f} kN")
print("   (the wall only reaches this point after its first-order lag)")
