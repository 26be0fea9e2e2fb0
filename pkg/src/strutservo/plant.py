"""Quasi-static digital twin of one strutted excavation cross-section.

Each strut level is a 1-DOF spring pair: the retaining wall mobilizes less
earth load the further it yields into the pit (soil relief spring), while the
steel strut pushes back harder the more it is compressed (strut spring).  The
strut is compressed by wall movement, jack extension, and thermal expansion of
the pipe.  Equilibrium is the intersection of the two laws; the wall tracks
the equilibrium point with a first-order lag.

Sign conventions (enforced in tests):
    w  wall displacement, mm, positive toward the pit
    u  jack extension, mm, positive extending
    F  strut axial force, kN, positive in compression
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class StrutParams:
    """Steel strut + jack parameters for one level."""

    length_mm: float = 10_000.0
    axial_stiffness_kn_per_mm: float = 626.0  # EA/L for a 10 m phi609x16 pipe
    thermal_coeff_per_c: float = 1.2e-5
    jack_stroke_mm: tuple[float, float] = (-50.0, 150.0)
    jack_rate_limit_mm_per_s: float = 0.5
    design_force_kn: float = 2250.0
    temp_time_constant_s: float = 60.0  # strut temperature lag toward ambient

    def __post_init__(self):
        if not self.length_mm > 0:
            raise ValueError("length_mm must be > 0")
        if not self.axial_stiffness_kn_per_mm > 0:
            raise ValueError("axial_stiffness_kn_per_mm must be > 0")
        if self.thermal_coeff_per_c < 0:
            raise ValueError("thermal_coeff_per_c must be >= 0")
        lo, hi = self.jack_stroke_mm
        if not lo < hi:
            raise ValueError("jack_stroke_mm min must be < max")
        if not self.jack_rate_limit_mm_per_s > 0:
            raise ValueError("jack_rate_limit_mm_per_s must be > 0")
        if not self.design_force_kn > 0:
            raise ValueError("design_force_kn must be > 0")
        if not self.temp_time_constant_s >= 0:
            raise ValueError("temp_time_constant_s must be >= 0")


@dataclass(frozen=True)
class SoilParams:
    """Soil/wall side of the spring pair for one strut's tributary panel."""

    driving_load_kn: float = 3000.0  # resultant unbalanced load at zero wall yield
    soil_stiffness_kn_per_mm: float = 200.0  # load relief per mm of yield
    load_bounds_kn: tuple[float, float] = (0.0, 10_000.0)  # active/passive clamp
    wall_time_constant_s: float = 60.0

    def __post_init__(self):
        if not self.soil_stiffness_kn_per_mm > 0:
            raise ValueError("soil_stiffness_kn_per_mm must be > 0")
        q_min, q_max = self.load_bounds_kn
        if not q_min <= self.driving_load_kn <= q_max:
            raise ValueError("driving_load_kn must lie within load_bounds_kn")
        if q_min < 0:
            raise ValueError("load_bounds_kn min must be >= 0 (compressive earth load)")
        if not self.wall_time_constant_s > 0:
            raise ValueError("wall_time_constant_s must be > 0")


@dataclass(frozen=True)
class PlantState:
    """Instantaneous truth for one strut level."""

    wall_disp_mm: float
    jack_ext_mm: float
    temp_c: float
    ref_temp_c: float  # temperature at pre-stress lock-off
    strut_force_kn: float
    stage_index: int = 0

    def __post_init__(self):
        if not math.isfinite(self.wall_disp_mm):
            raise ValueError("wall_disp_mm must be finite")
        if self.strut_force_kn < 0:
            raise ValueError("strut_force_kn must be >= 0")


def thermal_elongation(params: StrutParams, delta_t_c: float) -> float:
    """Free thermal length change of the strut, mm; sign follows the temperature change."""
    return params.thermal_coeff_per_c * params.length_mm * delta_t_c


def mobilized_load(soil: SoilParams, wall_disp_mm: float) -> float:
    """Earth load on the strut head at a given wall yield, with active/passive clamp."""
    q_min, q_max = soil.load_bounds_kn
    q = soil.driving_load_kn - soil.soil_stiffness_kn_per_mm * wall_disp_mm
    return min(max(q, q_min), q_max)


def strut_reaction(strut: StrutParams, wall_disp_mm: float, total_ext_mm: float) -> float:
    """Strut push-back at a given wall yield; cannot pull (compression only).

    total_ext_mm is jack extension plus free thermal elongation.
    """
    return max(0.0, strut.axial_stiffness_kn_per_mm * (wall_disp_mm + total_ext_mm))


def solve_equilibrium(
    strut: StrutParams,
    soil: SoilParams,
    jack_ext_mm: float,
    delta_t_c: float,
) -> tuple[float, float]:
    """Static equilibrium (wall_disp_mm, strut_force_kn) for the current jack and temperature.

    Solves mobilized_load(w) == strut_reaction(w) in closed form.  The residual
    is monotone non-increasing in w, so the root is unique except when the
    strut disengages exactly as the load relieves to zero; there the smallest
    root is returned (the wall stops as soon as the load is relieved).
    """
    k_soil = soil.soil_stiffness_kn_per_mm
    k_strut = strut.axial_stiffness_kn_per_mm
    q0 = soil.driving_load_kn
    q_min, q_max = soil.load_bounds_kn
    ext = jack_ext_mm + thermal_elongation(strut, delta_t_c)

    # Both laws in their linear interior.
    w = (q0 - k_strut * ext) / (k_soil + k_strut)
    force = k_strut * (w + ext)
    if force >= 0.0 and q_min <= q0 - k_soil * w <= q_max:
        return w, force

    # Load pinned at the passive clamp, strut interior.
    w = q_max / k_strut - ext
    if w + ext >= 0.0 and q0 - k_soil * w >= q_max:
        return w, q_max

    # Load pinned at the active clamp, strut interior.
    if q_min > 0.0:
        w = q_min / k_strut - ext
        if q0 - k_soil * w <= q_min:
            return w, q_min

    # Strut slack: the wall yields until the load is fully relieved.
    return q0 / k_soil, 0.0


@dataclass(frozen=True)
class StageItem:
    """One excavation stage: a step increase of the driving load."""

    index: int
    increment_kn: float


def apply_stage(state: PlantState, soil: SoilParams, stage: StageItem) -> tuple[PlantState, SoilParams]:
    """Apply an excavation stage as a driving-load step; the wall responds on later steps."""
    if stage.index != state.stage_index + 1:
        raise ValueError(
            f"stage out of order: got index {stage.index}, expected {state.stage_index + 1}"
        )
    new_q0 = soil.driving_load_kn + stage.increment_kn
    q_min, q_max = soil.load_bounds_kn
    if not q_min <= new_q0 <= q_max:
        raise ValueError(
            f"stage increment drives load {new_q0} kN outside bounds [{q_min}, {q_max}]"
        )
    new_soil = replace(soil, driving_load_kn=new_q0)
    new_state = replace(state, stage_index=stage.index)
    return new_state, new_soil


def step_plant(
    state: PlantState,
    strut: StrutParams,
    soil: SoilParams,
    dt_s: float,
    jack_cmd_mm_per_s: float,
    ambient_temp_c: float,
) -> PlantState:
    """Advance the twin by one step under a jack rate command and ambient temperature.

    The command is rate-limited and stroke-clamped, never rejected.  Strut
    temperature relaxes toward ambient and the wall relaxes toward the static
    equilibrium point, both first-order.
    """
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")

    rate = min(max(jack_cmd_mm_per_s, -strut.jack_rate_limit_mm_per_s), strut.jack_rate_limit_mm_per_s)
    lo, hi = strut.jack_stroke_mm
    jack = min(max(state.jack_ext_mm + rate * dt_s, lo), hi)

    if strut.temp_time_constant_s == 0.0:
        temp = ambient_temp_c
    else:
        temp = state.temp_c + (ambient_temp_c - state.temp_c) * (
            1.0 - math.exp(-dt_s / strut.temp_time_constant_s)
        )

    w_eq, _ = solve_equilibrium(strut, soil, jack, temp - state.ref_temp_c)
    wall = state.wall_disp_mm + (w_eq - state.wall_disp_mm) * (
        1.0 - math.exp(-dt_s / soil.wall_time_constant_s)
    )
    ext = jack + thermal_elongation(strut, temp - state.ref_temp_c)
    force = strut_reaction(strut, wall, ext)

    return PlantState(
        wall_disp_mm=wall,
        jack_ext_mm=jack,
        temp_c=temp,
        ref_temp_c=state.ref_temp_c,
        strut_force_kn=force,
        stage_index=state.stage_index,
    )


def prestress_jack_extension(strut: StrutParams, soil: SoilParams, force_kn: float) -> float:
    """Jack extension that yields the given lock-off force at reference temperature.

    Inverts the interior equilibrium law; the result is stroke-clamped, so an
    unreachable pre-stress silently saturates at the stroke end.
    """
    k_soil = soil.soil_stiffness_kn_per_mm
    k_strut = strut.axial_stiffness_kn_per_mm
    u = ((k_soil + k_strut) * force_kn / k_strut - soil.driving_load_kn) / k_soil
    lo, hi = strut.jack_stroke_mm
    return min(max(u, lo), hi)


def initial_state(
    strut: StrutParams,
    soil: SoilParams,
    prestress_kn: float,
    ambient_temp_c: float,
) -> PlantState:
    """Locked-off plant state: jack set for the pre-stress force, wall at equilibrium."""
    jack = prestress_jack_extension(strut, soil, prestress_kn)
    w, force = solve_equilibrium(strut, soil, jack, 0.0)
    return PlantState(
        wall_disp_mm=w,
        jack_ext_mm=jack,
        temp_c=ambient_temp_c,
        ref_temp_c=ambient_temp_c,
        strut_force_kn=force,
        stage_index=0,
    )
