"""Named caliper timers and a process-wide timer database.

A timer bundles one instance of every clock backend registered at the time
the timer is created, so a single start/stop pair measures the same interval
on all of them.  The database hands out integer handles, keeps names unique,
and produces consistent point-in-time snapshots that are safe to take while
other threads start and stop timers.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .clocks import ClockInstance, ClockRegistry
from .errors import DuplicateNameError, UnknownNameError


@dataclass(frozen=True)
class ClockSpec:
    """Shape of one clock's contribution to a snapshot."""

    name: str
    units: tuple[str, ...]
    value_names: tuple[str, ...]


@dataclass(frozen=True)
class SnapshotEntry:
    """State of one timer at snapshot time.  Values are raw integers."""

    name: str
    running: bool
    values: Mapping[str, tuple[int, ...]]


@dataclass(frozen=True)
class TimerSnapshot:
    """Immutable view of every timer in a database at one instant."""

    taken_at_ns: int
    clocks: tuple[ClockSpec, ...]
    entries: tuple[SnapshotEntry, ...]


class Timer:
    """A named bundle of clock instances started and stopped together."""

    __slots__ = ("name", "handle", "clocks")

    def __init__(self, name: str, handle: int, clocks: dict[str, ClockInstance]):
        self.name = name
        self.handle = handle
        self.clocks = clocks

    @property
    def running(self) -> bool:
        return next(iter(self.clocks.values())).running if self.clocks else False

    def start(self) -> None:
        for inst in self.clocks.values():
            inst.start()

    def stop(self) -> None:
        for inst in self.clocks.values():
            inst.stop()

    def reset(self) -> None:
        for inst in self.clocks.values():
            inst.reset()


class TimerDatabase:
    """Registry of timers addressed by handle, with atomic snapshots.

    Handles are never recycled; a timer lives for the lifetime of the
    database.  All mutating operations and snapshot reads take one lock, so
    a snapshot never observes a timer mid-update.
    """

    def __init__(self, registry: ClockRegistry, wall_ns: Callable[[], int] | None = None):
        self._registry = registry
        self._wall_ns = wall_ns if wall_ns is not None else time.monotonic_ns
        self._timers: list[Timer] = []
        self._by_name: dict[str, int] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._timers)

    @property
    def registry(self) -> ClockRegistry:
        return self._registry

    def create(self, name: str) -> int:
        """Create a stopped timer carrying every currently registered clock."""
        if not name:
            raise ValueError("timer name must be non-empty")
        with self._lock:
            if name in self._by_name:
                raise DuplicateNameError(f"timer {name!r} already exists")
            handle = len(self._timers)
            clocks = {b.name: b.create() for b in self._registry}
            self._timers.append(Timer(name, handle, clocks))
            self._by_name[name] = handle
            return handle

    def lookup(self, name: str) -> int | None:
        """Return the handle for ``name``, or ``None`` if no such timer."""
        with self._lock:
            return self._by_name.get(name)

    def _timer(self, handle: int) -> Timer:
        if not 0 <= handle < len(self._timers):
            raise UnknownNameError(f"no timer with handle {handle}")
        return self._timers[handle]

    def name_of(self, handle: int) -> str:
        with self._lock:
            return self._timer(handle).name

    def is_running(self, handle: int) -> bool:
        with self._lock:
            return self._timer(handle).running

    def start(self, handle: int) -> None:
        with self._lock:
            self._timer(handle).start()

    def stop(self, handle: int) -> None:
        with self._lock:
            self._timer(handle).stop()

    def reset(self, handle: int) -> None:
        with self._lock:
            self._timer(handle).reset()

    def read_raw(self, handle: int) -> dict[str, tuple[int, ...]]:
        """Raw integer values per clock; running timers include the live interval."""
        with self._lock:
            timer = self._timer(handle)
            return {name: tuple(inst.get_raw()) for name, inst in timer.clocks.items()}

    def read(self, handle: int) -> dict[str, list[float | int]]:
        """Values per clock scaled to natural units (seconds or counts)."""
        with self._lock:
            timer = self._timer(handle)
            return {name: inst.get() for name, inst in timer.clocks.items()}

    def set_raw(self, handle: int, values: Mapping[str, Sequence[int]]) -> None:
        """Overwrite clock values of a stopped timer from raw integers."""
        with self._lock:
            timer = self._timer(handle)
            for clock_name, vector in values.items():
                if clock_name not in timer.clocks:
                    raise UnknownNameError(
                        f"timer {timer.name!r} has no clock {clock_name!r}"
                    )
                timer.clocks[clock_name].set_raw(vector)

    def set_values(self, handle: int, values: Mapping[str, Sequence[float | int]]) -> None:
        """Overwrite clock values of a stopped timer, given in natural units."""
        with self._lock:
            timer = self._timer(handle)
            for clock_name, vector in values.items():
                if clock_name not in timer.clocks:
                    raise UnknownNameError(
                        f"timer {timer.name!r} has no clock {clock_name!r}"
                    )
                timer.clocks[clock_name].set(vector)

    def snapshot(self) -> TimerSnapshot:
        """Capture every timer at one instant, running ones included."""
        with self._lock:
            clocks = tuple(
                ClockSpec(
                    name=b.name,
                    units=tuple(d.unit for d in b.descriptors),
                    value_names=tuple(d.name for d in b.descriptors),
                )
                for b in self._registry
            )
            entries = tuple(
                SnapshotEntry(
                    name=t.name,
                    running=t.running,
                    values={name: tuple(inst.get_raw()) for name, inst in t.clocks.items()},
                )
                for t in self._timers
            )
            return TimerSnapshot(taken_at_ns=self._wall_ns(), clocks=clocks, entries=entries)
