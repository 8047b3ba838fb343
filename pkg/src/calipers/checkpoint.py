"""Checkpoint policies, cost accounting, and checkpoint files.

Two policies are supported.  ``fixed_interval`` checkpoints every N
iterations.  ``adaptive`` grants a checkpoint only while the time spent
checkpointing stays within a budgeted fraction of elapsed run time; an
optional maximum interval forces a checkpoint regardless of budget, bounding
the work lost to a crash.

All decision arithmetic is exact: times are integer nanoseconds and the
budget fraction is a :class:`fractions.Fraction`, so results are
reproducible bit-for-bit across platforms.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    CheckpointCorruptError,
    CheckpointFileError,
    CheckpointVersionError,
    PolicyError,
)

MODE_FIXED = "fixed_interval"
MODE_ADAPTIVE = "adaptive"

VERDICT_CHECKPOINT = "checkpoint"
VERDICT_SKIP = "skip"

REASON_INITIAL = "initial"
REASON_TERMINAL = "terminal"
REASON_PERIODIC_DUE = "periodic_due"
REASON_ADAPTIVE_ALLOWED = "adaptive_allowed"
REASON_MAX_INTERVAL_FORCED = "max_interval_forced"
REASON_SKIP_FRACTION_EXCEEDED = "skip_fraction_exceeded"
REASON_SKIP_NOT_DUE = "skip_not_due"


def normalize_fraction(value) -> Fraction:
    """Build an exact Fraction from a float, string, int, or Fraction.

    Floats go through their decimal string form, so 0.05 becomes exactly
    1/20 rather than the nearest binary float.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class CheckpointPolicy:
    """Validated checkpoint policy; construct via the factory methods."""

    mode: str
    every_iterations: int | None = None
    max_fraction: Fraction | None = None
    max_interval_ns: int | None = None
    checkpoint_on_initial: bool = False
    checkpoint_on_terminate: bool = False

    def __post_init__(self):
        if self.mode == MODE_FIXED:
            if self.every_iterations is None or self.every_iterations < 1:
                raise PolicyError(
                    f"fixed_interval needs every_iterations >= 1, got {self.every_iterations!r}"
                )
            if self.max_fraction is not None or self.max_interval_ns is not None:
                raise PolicyError("fixed_interval does not take adaptive parameters")
        elif self.mode == MODE_ADAPTIVE:
            if self.every_iterations is not None:
                raise PolicyError("adaptive does not take every_iterations")
            if not isinstance(self.max_fraction, Fraction):
                raise PolicyError("adaptive needs max_fraction as a Fraction")
            if not 0 < self.max_fraction <= 1:
                raise PolicyError(
                    f"max_fraction must be in (0, 1], got {self.max_fraction}"
                )
            if self.max_interval_ns is not None and self.max_interval_ns < 1:
                raise PolicyError(
                    f"max_interval_ns must be positive, got {self.max_interval_ns}"
                )
        else:
            raise PolicyError(f"unknown checkpoint mode {self.mode!r}")

    @classmethod
    def fixed_interval(cls, every_iterations: int = 512, *,
                       on_initial: bool = False, on_terminate: bool = False):
        return cls(
            mode=MODE_FIXED,
            every_iterations=every_iterations,
            checkpoint_on_initial=on_initial,
            checkpoint_on_terminate=on_terminate,
        )

    @classmethod
    def adaptive(cls, max_fraction, *, max_interval_ns: int | None = None,
                 on_initial: bool = False, on_terminate: bool = False):
        return cls(
            mode=MODE_ADAPTIVE,
            max_fraction=normalize_fraction(max_fraction),
            max_interval_ns=max_interval_ns,
            checkpoint_on_initial=on_initial,
            checkpoint_on_terminate=on_terminate,
        )


@dataclass
class CheckpointAccounting:
    """Running totals of time spent writing checkpoints."""

    start_ns: int = 0  # when the run (and therefore the budget) began
    total_checkpoint_ns: int = 0
    checkpoints_taken: int = 0
    last_start_ns: int | None = None
    last_end_ns: int | None = None
    last_duration_ns: int = 0

    def record(self, start_ns: int, end_ns: int) -> None:
        """Account one completed checkpoint write."""
        if end_ns < start_ns:
            raise ValueError(f"checkpoint ended before it started ({start_ns}..{end_ns})")
        if start_ns < self.start_ns:
            raise ValueError("checkpoint started before the accounting epoch")
        if self.last_end_ns is not None and start_ns < self.last_end_ns:
            raise ValueError("checkpoints may not overlap")
        self.total_checkpoint_ns += end_ns - start_ns
        self.checkpoints_taken += 1
        self.last_start_ns = start_ns
        self.last_end_ns = end_ns
        self.last_duration_ns = end_ns - start_ns

    def elapsed_ns(self, now_ns: int) -> int:
        if now_ns < self.start_ns:
            raise ValueError("clock reads before the accounting epoch")
        return now_ns - self.start_ns

    def since_last_start_ns(self, now_ns: int) -> int:
        """Time since the last checkpoint began (or since the run began)."""
        anchor = self.last_start_ns if self.last_start_ns is not None else self.start_ns
        return now_ns - anchor

    def fraction(self, now_ns: int) -> float:
        """Checkpoint share of elapsed time; defined as 0 at elapsed 0."""
        elapsed = self.elapsed_ns(now_ns)
        if elapsed == 0:
            return 0.0
        return self.total_checkpoint_ns / elapsed

    def as_dict(self) -> dict:
        return {
            "start_ns": self.start_ns,
            "total_checkpoint_ns": self.total_checkpoint_ns,
            "checkpoints_taken": self.checkpoints_taken,
            "last_start_ns": self.last_start_ns,
            "last_end_ns": self.last_end_ns,
            "last_duration_ns": self.last_duration_ns,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CheckpointAccounting":
        return cls(**{k: doc[k] for k in (
            "start_ns", "total_checkpoint_ns", "checkpoints_taken",
            "last_start_ns", "last_end_ns", "last_duration_ns",
        )})


@dataclass(frozen=True)
class CheckpointDecision:
    verdict: str
    reason: str

    @property
    def should_checkpoint(self) -> bool:
        return self.verdict == VERDICT_CHECKPOINT

    def __str__(self):
        return f"{self.verdict}({self.reason})"


def _checkpoint(reason: str) -> CheckpointDecision:
    return CheckpointDecision(VERDICT_CHECKPOINT, reason)


def _skip(reason: str) -> CheckpointDecision:
    return CheckpointDecision(VERDICT_SKIP, reason)


def decide(policy: CheckpointPolicy, accounting: CheckpointAccounting,
           now_ns: int, iteration: int, *,
           is_initial: bool = False, is_terminal: bool = False) -> CheckpointDecision:
    """Decide whether to checkpoint right now.

    Precedence: terminal and initial occasions are answered solely by their
    policy flags.  In adaptive mode an overdue interval forces a checkpoint;
    otherwise the budget gate applies.  The gate is forward-looking: it
    grants only if the budget still holds *after* a write of the last
    observed duration, so the recorded fraction stays at or below the budget
    whenever grants are driven by the gate alone.
    """
    if is_terminal:
        return _checkpoint(REASON_TERMINAL) if policy.checkpoint_on_terminate \
            else _skip(REASON_SKIP_NOT_DUE)
    if is_initial:
        return _checkpoint(REASON_INITIAL) if policy.checkpoint_on_initial \
            else _skip(REASON_SKIP_NOT_DUE)

    if policy.mode == MODE_ADAPTIVE:
        if policy.max_interval_ns is not None and \
                accounting.since_last_start_ns(now_ns) >= policy.max_interval_ns:
            return _checkpoint(REASON_MAX_INTERVAL_FORCED)
        elapsed = accounting.elapsed_ns(now_ns)
        spent = accounting.total_checkpoint_ns
        expected = accounting.last_duration_ns
        budget = policy.max_fraction
        if (spent + expected) * budget.denominator <= budget.numerator * (elapsed + expected):
            return _checkpoint(REASON_ADAPTIVE_ALLOWED)
        return _skip(REASON_SKIP_FRACTION_EXCEEDED)

    # fixed_interval
    if iteration > 0 and iteration % policy.every_iterations == 0:
        return _checkpoint(REASON_PERIODIC_DUE)
    return _skip(REASON_SKIP_NOT_DUE)


# --------------------------------------------------------------------------
# Checkpoint files
# --------------------------------------------------------------------------

FILE_MAGIC = b"ACKP"
FILE_VERSION = 1

TimerValues = Mapping[str, Mapping[str, Sequence[int]]]


@dataclass(frozen=True)
class CheckpointState:
    """Simulation state captured at checkpoint completion."""

    iteration: int
    levels: int
    grid_points: int
    vtime_ns: int


@dataclass(frozen=True)
class CheckpointData:
    state: CheckpointState
    accounting: CheckpointAccounting
    timers: dict[str, dict[str, tuple[int, ...]]] = field(default_factory=dict)


def checkpoint_filename(iteration: int) -> str:
    return f"checkpoint.it_{iteration}.chk"


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise CheckpointFileError(f"name too long to store: {text[:40]!r}...")
    return struct.pack("<H", len(raw)) + raw


def write_checkpoint(path: str | Path, state: CheckpointState,
                     accounting: CheckpointAccounting,
                     timers: TimerValues | None = None) -> Path:
    """Write a checkpoint file atomically; returns the final path."""
    path = Path(path)
    timers = timers or {}
    parts = [FILE_MAGIC, struct.pack("<I", FILE_VERSION)]
    parts.append(struct.pack(
        "<QQQQ", state.iteration, state.levels, state.grid_points, state.vtime_ns
    ))
    has_last = accounting.last_start_ns is not None
    parts.append(struct.pack(
        "<QQQBQQQ",
        accounting.start_ns,
        accounting.total_checkpoint_ns,
        accounting.checkpoints_taken,
        1 if has_last else 0,
        accounting.last_start_ns or 0,
        accounting.last_end_ns or 0,
        accounting.last_duration_ns,
    ))
    parts.append(struct.pack("<I", len(timers)))
    for timer_name, clocks in timers.items():
        parts.append(_pack_str(timer_name))
        parts.append(struct.pack("<H", len(clocks)))
        for clock_name, values in clocks.items():
            parts.append(_pack_str(clock_name))
            parts.append(struct.pack("<H", len(values)))
            parts.append(struct.pack(f"<{len(values)}q", *values))
    payload = b"".join(parts)
    blob = payload + struct.pack("<I", zlib.crc32(payload))

    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointFileError(f"cannot write checkpoint {path}: {exc}") from exc
    return path


class _Reader:
    """Cursor over a byte blob that treats overruns as corruption."""

    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, size: int) -> bytes:
        end = self.pos + size
        if end > len(self.blob):
            raise CheckpointCorruptError(f"{self.path}: truncated checkpoint file")
        chunk = self.blob[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def take_str(self) -> str:
        (length,) = self.unpack("<H")
        return self.take(length).decode("utf-8")


def read_checkpoint(path: str | Path) -> CheckpointData:
    """Read and verify a checkpoint file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointFileError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < len(FILE_MAGIC) + 8:
        raise CheckpointCorruptError(f"{path}: truncated checkpoint file")
    payload, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) != stored_crc:
        raise CheckpointCorruptError(f"{path}: checksum mismatch")

    reader = _Reader(payload, path)
    if reader.take(len(FILE_MAGIC)) != FILE_MAGIC:
        raise CheckpointCorruptError(f"{path}: not a checkpoint file")
    (version,) = reader.unpack("<I")
    if version != FILE_VERSION:
        raise CheckpointVersionError(
            f"{path}: unsupported checkpoint version {version} (expected {FILE_VERSION})"
        )

    iteration, levels, grid_points, vtime_ns = reader.unpack("<QQQQ")
    (start_ns, total_ns, taken, has_last, last_start, last_end, last_dur) = \
        reader.unpack("<QQQBQQQ")
    accounting = CheckpointAccounting(
        start_ns=start_ns,
        total_checkpoint_ns=total_ns,
        checkpoints_taken=taken,
        last_start_ns=last_start if has_last else None,
        last_end_ns=last_end if has_last else None,
        last_duration_ns=last_dur,
    )

    (timer_count,) = reader.unpack("<I")
    timers: dict[str, dict[str, tuple[int, ...]]] = {}
    for _ in range(timer_count):
        timer_name = reader.take_str()
        (clock_count,) = reader.unpack("<H")
        clocks: dict[str, tuple[int, ...]] = {}
        for _ in range(clock_count):
            clock_name = reader.take_str()
            (value_count,) = reader.unpack("<H")
            clocks[clock_name] = reader.unpack(f"<{value_count}q")
        timers[timer_name] = clocks
    if reader.pos != len(payload):
        raise CheckpointCorruptError(f"{path}: trailing bytes after checkpoint payload")

    return CheckpointData(
        state=CheckpointState(
            iteration=iteration, levels=levels, grid_points=grid_points, vtime_ns=vtime_ns
        ),
        accounting=accounting,
        timers=timers,
    )
