"""Append-only per-run telemetry with windowed queries and bit-exact export.

One record per tick, immutable once appended.  Both plant truth and measured
values are stored; the twin can grade its own sensors, which the deployed
system cannot.  Exports are canonical: documented column order, LF newlines,
floats rendered as shortest round-trip decimals, so identical stores export
identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class AlarmEvent:
    """One alarm transition, as published to telemetry and the state stream."""

    channel: str
    level: str
    latched: bool
    acknowledged: bool
    raised_tick: int | None


@dataclass(frozen=True)
class StrutChannels:
    true_force_kn: float
    measured_force_kn: float
    true_disp_mm: float
    measured_disp_mm: float
    temp_c: float
    jack_ext_mm: float
    command_mm_per_s: float
    mode: str
    error_kn: float
    lock_loads_kn: tuple[float, ...]


@dataclass(frozen=True)
class TelemetryRecord:
    tick: int
    struts: dict[str, StrutChannels]
    alarm_events: tuple[AlarmEvent, ...] = ()
    event_tags: tuple[str, ...] = ()


_CHANNEL_FIELDS = (
    "true_force_kn",
    "measured_force_kn",
    "true_disp_mm",
    "measured_disp_mm",
    "temp_c",
    "jack_ext_mm",
    "command_mm_per_s",
    "mode",
    "error_kn",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_header(strut_ids: list[str], n_locks: int) -> list[str]:
    cols = ["tick"]
    for sid in strut_ids:
        cols.extend(f"{sid}_{f}" for f in _CHANNEL_FIELDS)
        cols.extend(f"{sid}_lock{j}_kn" for j in range(n_locks))
    cols.extend(["alarm_events", "event_tags"])
    return cols


def _alarm_cell(events: tuple[AlarmEvent, ...]) -> str:
    return ";".join(
        f"{e.channel}={e.level}"
        + (":latched" if e.latched else "")
        + (":ack" if e.acknowledged else "")
        for e in events
    )


def csv_row(rec: TelemetryRecord, strut_ids: list[str], n_locks: int) -> list[str]:
    row = [str(rec.tick)]
    for sid in strut_ids:
        ch = rec.struts[sid]
        row.extend(_fmt(getattr(ch, f)) for f in _CHANNEL_FIELDS)
        loads = list(ch.lock_loads_kn) + [0.0] * (n_locks - len(ch.lock_loads_kn))
        row.extend(_fmt(x) for x in loads[:n_locks])
    row.append(_alarm_cell(rec.alarm_events))
    row.append(";".join(rec.event_tags))
    return row


def record_to_dict(rec: TelemetryRecord) -> dict:
    return {
        "tick": rec.tick,
        "struts": {sid: asdict(ch) for sid, ch in rec.struts.items()},
        "alarm_events": [asdict(e) for e in rec.alarm_events],
        "event_tags": list(rec.event_tags),
    }


class TelemetryStore:
    """Insertion-ordered, gap-free record log for one run."""

    def __init__(self, strut_ids: list[str], n_locks: int):
        self.strut_ids = list(strut_ids)
        self.n_locks = n_locks
        self._records: list[TelemetryRecord] = []

    def __len__(self) -> int:
        return len(self._records)

    def record(self, rec: TelemetryRecord) -> None:
        expected = self._records[-1].tick + 1 if self._records else 0
        if rec.tick != expected:
            raise ValueError(f"tick {rec.tick} breaks continuity (expected {expected})")
        self._records.append(rec)

    def query(self, start: int, end: int, strut_id: str | None = None) -> list[TelemetryRecord]:
        """Records with tick in the half-open [start, end), optionally one strut's channels."""
        if end < start:
            raise ValueError(f"inverted range [{start}, {end})")
        selected = [r for r in self._records if start <= r.tick < end]
        if strut_id is None:
            return selected
        if strut_id not in self.strut_ids:
            raise KeyError(strut_id)
        return [
            TelemetryRecord(
                tick=r.tick,
                struts={strut_id: r.struts[strut_id]},
                alarm_events=tuple(e for e in r.alarm_events
                                   if e.channel.startswith(strut_id + "/")),
                event_tags=r.event_tags,
            )
            for r in selected
        ]

    def export(self, fmt: str = "csv") -> bytes:
        """Canonical byte stream; identical stores export identical bytes."""
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(csv_header(self.strut_ids, self.n_locks))
            for rec in self._records:
                writer.writerow(csv_row(rec, self.strut_ids, self.n_locks))
            return buf.getvalue().encode("utf-8")
        if fmt in ("jsonl", "line-delimited-records"):
            lines = [
                json.dumps(record_to_dict(r), sort_keys=True, separators=(",", ":"))
                for r in self._records
            ]
            return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
        raise ValueError(f"unknown export format {fmt!r}")


class RunWriter:
    """Streaming flush of a run directory: run.csv, events.log, summary.json."""

    def __init__(self, out_dir: str | Path, strut_ids: list[str], n_locks: int):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.strut_ids = list(strut_ids)
        self.n_locks = n_locks
        self._csv_file = open(self.dir / "run.csv", "w", encoding="utf-8", newline="")
        self._csv = csv.writer(self._csv_file, lineterminator="\n")
        self._csv.writerow(csv_header(self.strut_ids, self.n_locks))
        self._events = open(self.dir / "events.log", "w", encoding="utf-8", newline="")

    def write_record(self, rec: TelemetryRecord) -> None:
        self._csv.writerow(csv_row(rec, self.strut_ids, self.n_locks))

    def write_event(self, event: dict) -> None:
        self._events.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")

    def finalize(self, summary: dict) -> None:
        self._csv_file.close()
        self._events.close()
        with open(self.dir / "summary.json", "w", encoding="utf-8", newline="") as f:
            f.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
