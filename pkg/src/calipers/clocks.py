"""Pluggable clock backends and accumulating clock instances.

Every backend exposes a monotone sample vector of integers (nanoseconds for
time-like clocks, raw counts for counters).  Instances accumulate the
difference between start and stop samples, so arbitrarily many independent
measurement intervals can share one underlying source.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import ClockStateError, DuplicateNameError, UnknownNameError, ValueArityError

NS_PER_SECOND = 10**9

# Units a value descriptor may declare.
UNIT_SECONDS = "seconds"
UNIT_COUNT = "count"
_VALID_UNITS = (UNIT_SECONDS, UNIT_COUNT)

STATE_STOPPED = "stopped"
STATE_RUNNING = "running"


def seconds_to_ns(seconds: float) -> int:
    """Convert seconds to integer nanoseconds, rounding to the nearest tick."""
    return round(seconds * NS_PER_SECOND)


def ns_to_seconds(ns: int) -> float:
    return ns / NS_PER_SECOND


@dataclass(frozen=True)
class ClockValueDescriptor:
    """Describes one element of a backend's sample vector."""

    name: str
    unit: str
    resolution: float = 0.0  # granularity hint in `unit`; 0 means unknown

    def __post_init__(self):
        if self.unit not in _VALID_UNITS:
            raise ValueError(f"unknown clock unit {self.unit!r}")

    def scale_out(self, raw: int) -> float | int:
        """Convert a raw integer to the descriptor's natural unit."""
        if self.unit == UNIT_SECONDS:
            return ns_to_seconds(raw)
        return raw

    def scale_in(self, value: float | int) -> int:
        """Convert a value in the descriptor's natural unit to a raw integer."""
        if self.unit == UNIT_SECONDS:
            return seconds_to_ns(value)
        if value != int(value):
            raise ValueArityError(f"{self.name}: count values must be integers, got {value!r}")
        return int(value)


class ClockBackend:
    """A source of monotone non-decreasing sample vectors.

    Subclasses set ``name`` and ``descriptors`` and implement ``sample``.
    """

    name: str
    descriptors: tuple[ClockValueDescriptor, ...]

    def __init__(self, name: str, descriptors: Iterable[ClockValueDescriptor]):
        self.name = name
        self.descriptors = tuple(descriptors)
        if not self.descriptors:
            raise ValueError("a clock backend needs at least one value descriptor")

    @property
    def arity(self) -> int:
        return len(self.descriptors)

    def sample(self) -> list[int]:
        """Return the current raw sample vector."""
        raise NotImplementedError

    def create(self) -> "ClockInstance":
        return ClockInstance(self)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name!r}>"


class ClockInstance:
    """One accumulating measurement fed by a backend.

    An instance is either stopped or running.  While running, reads fold the
    live interval since the last start into the accumulated value without
    disturbing it.
    """

    __slots__ = ("backend", "_accumulated", "_epoch")

    def __init__(self, backend: ClockBackend):
        self.backend = backend
        self._accumulated = [0] * backend.arity
        self._epoch: list[int] | None = None

    @property
    def running(self) -> bool:
        return self._epoch is not None

    @property
    def state(self) -> str:
        return STATE_RUNNING if self.running else STATE_STOPPED

    def start(self) -> None:
        if self._epoch is not None:
            raise ClockStateError(f"clock {self.backend.name!r} is already running")
        self._epoch = self.backend.sample()

    def stop(self) -> None:
        if self._epoch is None:
            raise ClockStateError(f"clock {self.backend.name!r} is not running")
        now = self.backend.sample()
        acc = self._accumulated
        epoch = self._epoch
        for i in range(len(acc)):
            acc[i] += now[i] - epoch[i]
        self._epoch = None

    def reset(self) -> None:
        """Zero the accumulated value; a running instance keeps running."""
        self._accumulated = [0] * self.backend.arity
        if self._epoch is not None:
            self._epoch = self.backend.sample()

    def get_raw(self) -> list[int]:
        """Accumulated raw values, including the live interval if running."""
        if self._epoch is None:
            return list(self._accumulated)
        now = self.backend.sample()
        epoch = self._epoch
        return [a + (n - e) for a, n, e in zip(self._accumulated, now, epoch)]

    def get(self) -> list[float | int]:
        """Accumulated values scaled to each descriptor's natural unit."""
        return [d.scale_out(v) for d, v in zip(self.backend.descriptors, self.get_raw())]

    def set_raw(self, values: Sequence[int]) -> None:
        """Overwrite the accumulated raw values of a stopped instance."""
        if self._epoch is not None:
            raise ClockStateError(f"cannot set clock {self.backend.name!r} while running")
        if len(values) != self.backend.arity:
            raise ValueArityError(
                f"clock {self.backend.name!r} expects {self.backend.arity} values, "
                f"got {len(values)}"
            )
        self._accumulated = [int(v) for v in values]

    def set(self, values: Sequence[float | int]) -> None:
        """Overwrite the accumulated values, given in natural units."""
        if len(values) != self.backend.arity:
            raise ValueArityError(
                f"clock {self.backend.name!r} expects {self.backend.arity} values, "
                f"got {len(values)}"
            )
        self.set_raw([d.scale_in(v) for d, v in zip(self.backend.descriptors, values)])


class VirtualClockController:
    """Hand-cranked time source for deterministic simulated runs."""

    __slots__ = ("now_ns",)

    def __init__(self, start_ns: int = 0):
        self.now_ns = int(start_ns)

    @property
    def now_seconds(self) -> float:
        return ns_to_seconds(self.now_ns)

    def advance_ns(self, delta_ns: int) -> None:
        if delta_ns < 0:
            raise ValueError(f"cannot advance virtual time by {delta_ns} ns")
        self.now_ns += delta_ns

    def advance_seconds(self, delta: float) -> None:
        self.advance_ns(seconds_to_ns(delta))


class VirtualWallClock(ClockBackend):
    """Wall clock driven by a :class:`VirtualClockController`."""

    def __init__(self, controller: VirtualClockController, name: str = "virtual-wall"):
        super().__init__(name, [ClockValueDescriptor("time", UNIT_SECONDS, 1e-9)])
        self.controller = controller

    def sample(self) -> list[int]:
        return [self.controller.now_ns]


class SystemWallClock(ClockBackend):
    """Monotonic wall clock backed by ``time.monotonic_ns``."""

    def __init__(self, name: str = "real-wall"):
        super().__init__(name, [ClockValueDescriptor("time", UNIT_SECONDS, 1e-9)])

    def sample(self) -> list[int]:
        return [time.monotonic_ns()]


class ProcessCpuClock(ClockBackend):
    """CPU time of the current process, backed by ``time.process_time_ns``."""

    def __init__(self, name: str = "process-cpu"):
        super().__init__(name, [ClockValueDescriptor("cpu", UNIT_SECONDS, 1e-9)])

    def sample(self) -> list[int]:
        return [time.process_time_ns()]


class EventCounterClock(ClockBackend):
    """Monotone counters bumped explicitly with :meth:`record`."""

    def __init__(self, name: str = "event-counter", counters: Sequence[str] = ("events",)):
        super().__init__(
            name, [ClockValueDescriptor(c, UNIT_COUNT, 1.0) for c in counters]
        )
        if len(set(counters)) != len(tuple(counters)):
            raise DuplicateNameError(f"duplicate counter names in {list(counters)}")
        self._totals = [0] * len(self.descriptors)
        self._index = {d.name: i for i, d in enumerate(self.descriptors)}

    def record(self, amount: int = 1, counter: int | str = 0) -> None:
        """Add ``amount`` events to one counter.  Counts never decrease."""
        if amount < 0:
            raise ValueError(f"event counts cannot go backwards (amount={amount})")
        idx = self._index[counter] if isinstance(counter, str) else counter
        self._totals[idx] += amount

    def sample(self) -> list[int]:
        return list(self._totals)


class CallableClock(ClockBackend):
    """Adapter turning any ``() -> int`` sampler into a single-value backend."""

    def __init__(self, name: str, fn: Callable[[], int], unit: str = UNIT_SECONDS,
                 value_name: str = "value", resolution: float = 0.0):
        super().__init__(name, [ClockValueDescriptor(value_name, unit, resolution)])
        self._fn = fn

    def sample(self) -> list[int]:
        return [self._fn()]


def make_cycle_clock(name: str = "cycle") -> ClockBackend | None:
    """Best-effort CPU cycle counter.

    Returns ``None`` when the platform offers no usable counter; callers
    should treat absence as a normal condition, not an error.
    """
    import platform

    if platform.machine() not in ("x86_64", "AMD64"):
        return None
    try:
        import ctypes
        import mmap

        code = bytes(
            [
                0x0F, 0x31,              # rdtsc -> edx:eax
                0x48, 0xC1, 0xE2, 0x20,  # shl rdx, 32
                0x48, 0x09, 0xD0,        # or rax, rdx
                0xC3,                    # ret
            ]
        )
        buf = mmap.mmap(-1, mmap.PAGESIZE, prot=mmap.PROT_READ | mmap.PROT_WRITE | mmap.PROT_EXEC)
        buf.write(code)
        ftype = ctypes.CFUNCTYPE(ctypes.c_uint64)
        fn = ftype(ctypes.addressof(ctypes.c_char.from_buffer(buf)))
        first = fn()
        if fn() < first:  # garbage or a counter we cannot trust
            return None
        clock = CallableClock(name, lambda: int(fn()), unit=UNIT_COUNT,
                              value_name="cycles", resolution=1.0)
        clock._keepalive = (buf, fn)  # the mapping must outlive the backend
        return clock
    except Exception:
        return None


class ClockRegistry:
    """Ordered set of clock backends, addressed by handle or name."""

    def __init__(self):
        self._backends: list[ClockBackend] = []
        self._by_name: dict[str, int] = {}

    def register(self, backend: ClockBackend) -> int:
        """Add a backend and return its handle (its registration index)."""
        if backend.name in self._by_name:
            raise DuplicateNameError(f"clock backend {backend.name!r} already registered")
        handle = len(self._backends)
        self._backends.append(backend)
        self._by_name[backend.name] = handle
        return handle

    def __len__(self) -> int:
        return len(self._backends)

    def __iter__(self):
        return iter(self._backends)

    def names(self) -> list[str]:
        return [b.name for b in self._backends]

    def get(self, key: int | str) -> ClockBackend:
        if isinstance(key, str):
            if key not in self._by_name:
                raise UnknownNameError(f"no clock backend named {key!r}")
            return self._backends[self._by_name[key]]
        if not 0 <= key < len(self._backends):
            raise UnknownNameError(f"no clock backend with handle {key}")
        return self._backends[key]

    def create(self, key: int | str) -> ClockInstance:
        return self.get(key).create()
