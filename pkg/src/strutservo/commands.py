"""Operator command payloads and their envelope validation.

Shared by the gateway (live commands) and the scenario loader (scripted
commands), so nothing reaches the engine queue without the same checks.
"""

from __future__ import annotations

from .scenario import Envelope

COMMAND_KINDS = frozenset({
    "set_force_setpoint",
    "set_displacement_setpoint",
    "set_mode",
    "jog_jack",
    "ack_alarm",
    "e_stop",
    "reset",
    "inject_stage",
    "inject_temp_ramp",
})

_MODE_NAMES = frozenset({"force_hold", "displacement_hold", "manual", "locked"})
_NEEDS_STRUT = frozenset({"set_force_setpoint", "set_displacement_setpoint",
                          "set_mode", "jog_jack"})


def _number(payload: dict, key: str) -> float | None:
    v = payload.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return None
    return float(v)


def validate_payload(payload: dict, strut_ids: list[str], envelope: Envelope) -> str | None:
    """Returns a rejection reason, or None if the payload may enter the queue."""
    kind = payload.get("kind")
    if kind not in COMMAND_KINDS:
        return f"unknown command kind {kind!r}"

    sid = payload.get("strut")
    if kind in _NEEDS_STRUT or (kind == "inject_stage" and sid is not None):
        if sid is None and kind in _NEEDS_STRUT:
            return "missing strut"
        if sid is not None and sid not in strut_ids:
            return f"unknown strut {sid!r}"

    if kind == "set_force_setpoint":
        value = _number(payload, "value")
        if value is None:
            return "missing numeric value"
        lo, hi = envelope.force_setpoint_kn
        if not lo <= value <= hi:
            return f"out of envelope: setpoint {value:g} kN not in [{lo:g}, {hi:g}]"
    elif kind == "set_displacement_setpoint":
        value = _number(payload, "value")
        if value is None:
            return "missing numeric value"
        lo, hi = envelope.displacement_setpoint_mm
        if not lo <= value <= hi:
            return f"out of envelope: setpoint {value:g} mm not in [{lo:g}, {hi:g}]"
    elif kind == "jog_jack":
        value = _number(payload, "value")
        if value is None:
            return "missing numeric value"
        lo, hi = envelope.jog_mm_per_s
        if not lo <= value <= hi:
            return f"out of envelope: jog {value:g} mm/s not in [{lo:g}, {hi:g}]"
    elif kind == "set_mode":
        mode = payload.get("mode")
        if mode not in _MODE_NAMES:
            return f"unknown mode {mode!r}"
        if mode == "force_hold" and "value" in payload:
            value = _number(payload, "value")
            if value is None:
                return "mode setpoint must be numeric"
            lo, hi = envelope.force_setpoint_kn
            if not lo <= value <= hi:
                return f"out of envelope: setpoint {value:g} kN not in [{lo:g}, {hi:g}]"
        if mode == "manual" and "value" in payload:
            value = _number(payload, "value")
            if value is None:
                return "jog rate must be numeric"
            lo, hi = envelope.jog_mm_per_s
            if not lo <= value <= hi:
                return f"out of envelope: jog {value:g} mm/s not in [{lo:g}, {hi:g}]"
    elif kind == "ack_alarm":
        if not isinstance(payload.get("channel"), str):
            return "missing alarm channel"
    elif kind == "inject_stage":
        if _number(payload, "value") is None:
            return "missing numeric value"
    elif kind == "inject_temp_ramp":
        if _number(payload, "value") is None:
            return "missing numeric value"
        over = payload.get("over_ticks", 0)
        if isinstance(over, bool) or not isinstance(over, int) or over < 0:
            return "over_ticks must be a non-negative integer"
    return None
