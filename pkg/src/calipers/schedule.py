"""Schedule bins with automatic per-routine timing.

Routines are registered into named bins.  Running a bin starts a per-bin
total timer, then runs each routine bracketed by its own timer.  Timers are
stopped even when a routine raises, so a failure never leaves the database
in a half-running state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .errors import DuplicateNameError, UnknownNameError
from .timers import TimerDatabase

DEFAULT_BINS = (
    "STARTUP",
    "INITIAL",
    "CHECKPOINT_INITIAL",
    "EVOL",
    "CHECKPOINT",
    "ANALYSIS",
    "TERMINATE",
)

SIMULATION_TOTAL_TIMER = "Total time for simulation"


def bin_total_timer_name(bin_name: str) -> str:
    return f"Total time for {bin_name}"


def routine_timer_name(thorn: str, routine: str) -> str:
    return f"{thorn}: {routine}"


@dataclass(frozen=True)
class ScheduledRoutine:
    routine_id: int
    bin_name: str
    thorn: str
    name: str
    fn: Callable[[Any], None]
    timer_handle: int


@dataclass(frozen=True)
class BinRun:
    """Record of one bin execution."""

    bin_name: str
    routine_ids: tuple[int, ...]


@dataclass(frozen=True)
class ReportRow:
    thorn: str
    routine: str
    timer_name: str


@dataclass(frozen=True)
class ReportSection:
    """One bin's block in a rendered report."""

    rows: tuple[ReportRow, ...]
    total_timer: str | None  # None renders the rows without a total line


@dataclass(frozen=True)
class ReportLayout:
    """Grouping of timers into report blocks, in schedule order."""

    sections: tuple[ReportSection, ...]
    simulation_total_timer: str = SIMULATION_TOTAL_TIMER


class Scheduler:
    """Executes registered routines bin by bin, timing everything."""

    def __init__(self, db: TimerDatabase, bins: Iterable[str] = DEFAULT_BINS):
        self.db = db
        self._bins: dict[str, list[ScheduledRoutine]] = {}
        self._bin_totals: dict[str, int] = {}
        self._routines: list[ScheduledRoutine] = []
        for name in bins:
            if name in self._bins:
                raise DuplicateNameError(f"schedule bin {name!r} declared twice")
            self._bins[name] = []
            self._bin_totals[name] = db.create(bin_total_timer_name(name))
        self.simulation_timer = db.create(SIMULATION_TOTAL_TIMER)

    @property
    def bins(self) -> tuple[str, ...]:
        return tuple(self._bins)

    def register(self, bin_name: str, thorn: str, routine: str,
                 fn: Callable[[Any], None]) -> int:
        """Register a routine; its timer is created on the spot."""
        if bin_name not in self._bins:
            raise UnknownNameError(f"no schedule bin named {bin_name!r}")
        handle = self.db.create(routine_timer_name(thorn, routine))
        entry = ScheduledRoutine(
            routine_id=len(self._routines),
            bin_name=bin_name,
            thorn=thorn,
            name=routine,
            fn=fn,
            timer_handle=handle,
        )
        self._routines.append(entry)
        self._bins[bin_name].append(entry)
        return entry.routine_id

    def routines(self, bin_name: str) -> tuple[ScheduledRoutine, ...]:
        if bin_name not in self._bins:
            raise UnknownNameError(f"no schedule bin named {bin_name!r}")
        return tuple(self._bins[bin_name])

    def run_bin(self, bin_name: str, context: Any = None) -> BinRun:
        """Run every routine in the bin in registration order.

        The bin total timer brackets the whole pass; each routine's timer
        brackets only that routine.  Exceptions propagate after the affected
        timers are stopped.
        """
        if bin_name not in self._bins:
            raise UnknownNameError(f"no schedule bin named {bin_name!r}")
        db = self.db
        db.start(self._bin_totals[bin_name])
        executed: list[int] = []
        try:
            for entry in self._bins[bin_name]:
                db.start(entry.timer_handle)
                try:
                    entry.fn(context)
                finally:
                    db.stop(entry.timer_handle)
                executed.append(entry.routine_id)
        finally:
            db.stop(self._bin_totals[bin_name])
        return BinRun(bin_name=bin_name, routine_ids=tuple(executed))

    def start_simulation(self) -> None:
        self.db.start(self.simulation_timer)

    def finish_simulation(self) -> None:
        self.db.stop(self.simulation_timer)

    def layout(self) -> ReportLayout:
        """Report layout covering the scheduler's bins that have routines."""
        sections = []
        for bin_name, entries in self._bins.items():
            if not entries:
                continue
            rows = tuple(
                ReportRow(
                    thorn=e.thorn,
                    routine=e.name,
                    timer_name=self.db.name_of(e.timer_handle),
                )
                for e in entries
            )
            sections.append(
                ReportSection(rows=rows, total_timer=bin_total_timer_name(bin_name))
            )
        return ReportLayout(sections=tuple(sections))
