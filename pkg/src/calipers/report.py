"""Rendering and serialization of timer snapshots.

The text renderer produces the classic fixed-width table: a thorn column, a
routine column, and one right-aligned value column per clock value.  The
JSON exporter round-trips snapshots losslessly because raw integer values
are serialized, never floating-point seconds.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Callable, TextIO

from .clocks import UNIT_COUNT, UNIT_SECONDS
from .errors import SnapshotFormatError
from .schedule import ReportLayout
from .timers import ClockSpec, SnapshotEntry, TimerSnapshot

logger = logging.getLogger(__name__)

THORN_HEADER = "Thorn"
ROUTINE_HEADER = "Scheduled routine in time bin"

_UNIT_LABELS = {UNIT_SECONDS: "secs", UNIT_COUNT: "count"}


def format_seconds(ns: int) -> str:
    """Render integer nanoseconds as seconds with 8 decimal places."""
    return f"{Decimal(ns).scaleb(-9):.8f}"


def format_value(raw: int, unit: str) -> str:
    if unit == UNIT_SECONDS:
        return format_seconds(raw)
    return str(raw)


def _column_header(spec: ClockSpec, index: int) -> str:
    label = _UNIT_LABELS[spec.units[index]]
    if len(spec.units) == 1:
        return f"{spec.name} [{label}]"
    return f"{spec.name}:{spec.value_names[index]} [{label}]"


def _split_timer_name(name: str) -> tuple[str, str]:
    """Recover (thorn, routine) from a conventional "Thorn: routine" name."""
    if ": " in name:
        thorn, routine = name.split(": ", 1)
        return thorn, routine
    return "", name


def render_report(snapshot: TimerSnapshot, layout: ReportLayout | None = None) -> str:
    """Render a snapshot as a fixed-width table.

    Timers the layout does not mention are appended in their own block, so
    every timer in the snapshot appears exactly once.  The simulation total
    line is always rendered, reading zero when its timer is absent.
    """
    if layout is None:
        layout = ReportLayout(sections=())

    by_name = {entry.name: entry for entry in snapshot.entries}
    columns = [
        (spec, idx, _column_header(spec, idx))
        for spec in snapshot.clocks
        for idx in range(len(spec.units))
    ]
    zeros = [
        format_value(0, spec.units[idx]) for spec, idx, _ in columns
    ]

    def cells(entry: SnapshotEntry | None) -> list[str]:
        if entry is None:
            return list(zeros)
        out = []
        for col, (spec, idx, _) in enumerate(columns):
            vector = entry.values.get(spec.name)
            if vector is None:  # timer predates this backend's registration
                out.append(zeros[col])
            else:
                out.append(format_value(vector[idx], spec.units[idx]))
        return out

    # Assemble the row model first; widths depend on every cell.
    ROW, RULE = "row", "rule"
    body: list[tuple] = []
    consumed: set[str] = set()
    for section in layout.sections:
        for row in section.rows:
            body.append((ROW, row.thorn, row.routine, cells(by_name.get(row.timer_name))))
            consumed.add(row.timer_name)
        if section.total_timer is not None:
            body.append((RULE, "-"))
            body.append((ROW, "", section.total_timer, cells(by_name.get(section.total_timer))))
            consumed.add(section.total_timer)
        body.append((RULE, "="))

    extras = [
        entry
        for entry in snapshot.entries
        if entry.name not in consumed and entry.name != layout.simulation_total_timer
    ]
    if extras:
        for entry in extras:
            thorn, routine = _split_timer_name(entry.name)
            body.append((ROW, thorn, routine, cells(entry)))
        body.append((RULE, "="))

    total_name = layout.simulation_total_timer
    body.append((ROW, "", total_name, cells(by_name.get(total_name))))
    body.append((RULE, "="))

    thorn_width = max(
        [len(THORN_HEADER)] + [len(item[1]) for item in body if item[0] == ROW]
    ) + 3
    routine_width = max(
        [len(ROUTINE_HEADER)] + [len(item[2]) for item in body if item[0] == ROW]
    ) + 3
    value_widths = [
        max([len(header)] + [len(item[3][i]) for item in body if item[0] == ROW])
        for i, (_, _, header) in enumerate(columns)
    ]

    def render_line(thorn: str, routine: str, values: list[str]) -> str:
        segments = [f"{thorn:<{thorn_width}}", f" {routine:<{routine_width}}"]
        segments.extend(f" {v:>{w}} " for v, w in zip(values, value_widths))
        return "|".join(segments)

    header_line = render_line(THORN_HEADER, ROUTINE_HEADER, [h for _, _, h in columns])
    width = len(header_line)
    lines = [header_line, "=" * width]
    for item in body:
        if item[0] == RULE:
            lines.append(item[1] * width)
        else:
            lines.append(render_line(item[1], item[2], item[3]))
    return "\n".join(lines)


def snapshot_to_json(snapshot: TimerSnapshot) -> str:
    """Serialize a snapshot to canonical JSON (raw integers, sorted keys)."""
    doc = {
        "taken_at_ns": snapshot.taken_at_ns,
        "clocks": [
            {
                "name": spec.name,
                "units": list(spec.units),
                "values": list(spec.value_names),
            }
            for spec in snapshot.clocks
        ],
        "timers": [
            {
                "name": entry.name,
                "running": entry.running,
                "values": {clock: list(vector) for clock, vector in entry.values.items()},
            }
            for entry in snapshot.entries
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def snapshot_from_json(text: str) -> TimerSnapshot:
    """Parse a snapshot produced by :func:`snapshot_to_json`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"snapshot is not valid JSON: {exc}") from exc
    try:
        clocks = tuple(
            ClockSpec(
                name=str(c["name"]),
                units=tuple(str(u) for u in c["units"]),
                value_names=tuple(str(v) for v in c["values"]),
            )
            for c in doc["clocks"]
        )
        entries = tuple(
            SnapshotEntry(
                name=str(t["name"]),
                running=bool(t["running"]),
                values={
                    clock: tuple(int(v) for v in vector)
                    for clock, vector in t["values"].items()
                },
            )
            for t in doc["timers"]
        )
        taken_at = int(doc["taken_at_ns"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotFormatError(f"snapshot document is malformed: {exc!r}") from exc
    return TimerSnapshot(taken_at_ns=taken_at, clocks=clocks, entries=entries)


@dataclass
class ReportingConfig:
    """How and where periodic reports are emitted."""

    mode: str = "off"  # "off" or "full"
    period: int = 512
    sinks: tuple[str, ...] = ("stdout",)
    logfile: Path | None = None
    export_path: Path | None = None

    VALID_SINKS = ("stdout", "logfile", "export")

    def __post_init__(self):
        if self.mode not in ("off", "full"):
            raise ValueError(f"reporting mode must be 'off' or 'full', got {self.mode!r}")
        if self.period < 1:
            raise ValueError(f"report period must be >= 1, got {self.period}")
        for sink in self.sinks:
            if sink not in self.VALID_SINKS:
                raise ValueError(f"unknown report sink {sink!r}")
        if "logfile" in self.sinks and self.logfile is None:
            raise ValueError("sink 'logfile' requires a logfile path")
        if "export" in self.sinks and self.export_path is None:
            raise ValueError("sink 'export' requires an export path")


class PeriodicReporter:
    """Emits reports every N iterations; sink failures never propagate."""

    def __init__(self, config: ReportingConfig,
                 layout: ReportLayout | Callable[[], ReportLayout] | None = None,
                 out: TextIO | None = None):
        self.config = config
        self._layout = layout
        self._out = out
        self._warned: set[str] = set()

    def _resolve_layout(self) -> ReportLayout | None:
        if callable(self._layout):
            return self._layout()
        return self._layout

    def due(self, iteration: int) -> bool:
        """True when this iteration should emit a report.

        Iteration 0 lies on every period boundary and is due.
        """
        return self.config.mode == "full" and iteration % self.config.period == 0

    def maybe_emit(self, iteration: int, snapshot: TimerSnapshot) -> bool:
        """Emit when enabled and the iteration hits the period boundary."""
        if not self.due(iteration):
            return False
        self.emit(snapshot)
        return True

    def emit(self, snapshot: TimerSnapshot) -> None:
        for sink in self.config.sinks:
            try:
                if sink == "stdout":
                    print(render_report(snapshot, self._resolve_layout()),
                          file=self._out or sys.stdout)
                elif sink == "logfile":
                    with open(self.config.logfile, "a", encoding="utf-8") as fh:
                        fh.write(render_report(snapshot, self._resolve_layout()))
                        fh.write("\n\n")
                elif sink == "export":
                    with open(self.config.export_path, "a", encoding="utf-8") as fh:
                        fh.write(snapshot_to_json(snapshot))
                        fh.write("\n")
            except OSError as exc:
                if sink not in self._warned:
                    self._warned.add(sink)
                    logger.warning("report sink %s failed: %s", sink, exc)
