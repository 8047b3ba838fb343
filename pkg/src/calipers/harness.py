"""Deterministic synthetic mesh-refinement experiment harness.

The workload is a parametric cost model of an adaptively refined evolution:
every ``regrid_every`` iterations a refinement level is added, compute cost
per iteration doubles with each level, and checkpoint cost grows linearly
with the level count.  All costs advance a virtual clock, so runs are exact,
fast, and bit-for-bit reproducible.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, TextIO

from .checkpoint import (
    CheckpointAccounting,
    CheckpointPolicy,
    CheckpointState,
    checkpoint_filename,
    decide,
    read_checkpoint,
    write_checkpoint,
)
from .clocks import ClockRegistry, VirtualClockController, VirtualWallClock
from .errors import CalibrationError, ModelMismatchError
from .report import PeriodicReporter, ReportingConfig, render_report
from .schedule import ReportLayout, Scheduler
from .timers import TimerDatabase, TimerSnapshot

EVENT_NONE = "none"
EVENT_CHECKPOINT = "checkpoint"
EVENT_REGRID = "regrid"

SERIES_HEADER = "iteration,elapsed_ns,checkpoint_ns_cum,fraction,grid_points,event"

PHASE_INITIAL = "initial"
PHASE_ITERATION = "iteration"
PHASE_TERMINAL = "terminal"


@dataclass(frozen=True)
class WorkloadModel:
    """Synthetic cost model of a mesh-refined evolution run.

    ``level(it)`` grows by one every ``regrid_every`` iterations; compute
    cost doubles per level while checkpoint cost grows linearly, which is
    what makes a fixed checkpoint interval progressively more expensive.
    """

    total_iterations: int = 20480
    regrid_every: int = 5120
    base_points: int = 64000
    points_per_level: int = 64000
    compute_unit_ns: int = 1_000_000
    checkpoint_base_ns: int = 173_253_205
    startup_cost_ns: int = 0
    terminate_cost_ns: int = 0

    def __post_init__(self):
        if self.total_iterations < 0:
            raise ValueError("total_iterations must be >= 0")
        if self.regrid_every < 1:
            raise ValueError("regrid_every must be >= 1")
        if self.base_points < 1 or self.points_per_level < 1:
            raise ValueError("grid point counts must be positive")
        if self.compute_unit_ns < 1 or self.checkpoint_base_ns < 1:
            raise ValueError("cost constants must be positive")
        if self.startup_cost_ns < 0 or self.terminate_cost_ns < 0:
            raise ValueError("startup/terminate costs must be >= 0")

    def level(self, iteration: int) -> int:
        return iteration // self.regrid_every

    def grid_points(self, iteration: int) -> int:
        return self.base_points + self.level(iteration) * self.points_per_level

    def compute_ns(self, iteration: int) -> int:
        return self.compute_unit_ns << self.level(iteration)

    def checkpoint_cost_ns(self, iteration: int) -> int:
        return self.checkpoint_base_ns * (self.level(iteration) + 1)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class SeriesRow(NamedTuple):
    iteration: int
    elapsed_ns: int
    checkpoint_ns_cum: int
    fraction: float
    grid_points: int
    event: str

    def csv_line(self) -> str:
        return (
            f"{self.iteration},{self.elapsed_ns},{self.checkpoint_ns_cum},"
            f"{self.fraction!r},{self.grid_points},{self.event}"
        )


class DecisionRecord(NamedTuple):
    phase: str  # initial | iteration | terminal
    iteration: int
    verdict: str
    reason: str


@dataclass
class ExperimentResult:
    """Everything one experiment run produced."""

    model: WorkloadModel | None = None
    policy: CheckpointPolicy | None = None
    total_runtime_ns: int = 0
    total_checkpoint_ns: int = 0
    final_fraction: float = 0.0
    checkpoints_taken: int = 0
    series: list[SeriesRow] = field(default_factory=list)
    decisions: list[DecisionRecord] = field(default_factory=list)
    snapshot: TimerSnapshot | None = None
    layout: ReportLayout | None = None
    checkpoint_files: list[Path] = field(default_factory=list)

    @property
    def total_runtime_s(self) -> float:
        return self.total_runtime_ns / 1e9

    @property
    def total_checkpoint_s(self) -> float:
        return self.total_checkpoint_ns / 1e9

    def series_csv(self) -> str:
        lines = [SERIES_HEADER]
        lines.extend(row.csv_line() for row in self.series)
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        granted: dict[str, int] = {}
        skipped: dict[str, int] = {}
        for record in self.decisions:
            bucket = granted if record.verdict == "checkpoint" else skipped
            bucket[record.reason] = bucket.get(record.reason, 0) + 1
        return {
            "model": self.model.as_dict() if self.model else None,
            "policy": _policy_dict(self.policy) if self.policy else None,
            "total_runtime_ns": self.total_runtime_ns,
            "total_checkpoint_ns": self.total_checkpoint_ns,
            "final_fraction": self.final_fraction,
            "checkpoints_taken": self.checkpoints_taken,
            "decisions": {"granted": granted, "skipped": skipped},
            "checkpoint_files": sorted(p.name for p in self.checkpoint_files),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"

    def report_text(self) -> str:
        if self.snapshot is None:
            raise ValueError("this result carries no timer snapshot")
        return render_report(self.snapshot, self.layout)


def _policy_dict(policy: CheckpointPolicy) -> dict:
    return {
        "mode": policy.mode,
        "every_iterations": policy.every_iterations,
        "max_fraction": str(policy.max_fraction) if policy.max_fraction is not None else None,
        "max_interval_ns": policy.max_interval_ns,
        "checkpoint_on_initial": policy.checkpoint_on_initial,
        "checkpoint_on_terminate": policy.checkpoint_on_terminate,
    }


class _RunContext:
    """Mutable state shared by the scheduled routines of one run."""

    __slots__ = (
        "model", "policy", "controller", "accounting", "db",
        "iteration", "event", "decisions", "checkpoint_dir", "files",
    )

    def __init__(self, model, policy, controller, accounting, db, checkpoint_dir):
        self.model = model
        self.policy = policy
        self.controller = controller
        self.accounting = accounting
        self.db = db
        self.iteration = 0
        self.event = EVENT_NONE
        self.decisions: list[DecisionRecord] = []
        self.checkpoint_dir = checkpoint_dir
        self.files: list[Path] = []


def _perform_checkpoint(ctx: _RunContext, iteration: int) -> None:
    """Advance virtual time by the write cost, account it, emit the file."""
    model = ctx.model
    start = ctx.controller.now_ns
    ctx.controller.advance_ns(model.checkpoint_cost_ns(iteration))
    end = ctx.controller.now_ns
    ctx.accounting.record(start, end)
    ctx.event = EVENT_CHECKPOINT
    if ctx.checkpoint_dir is not None:
        state = CheckpointState(
            iteration=iteration,
            levels=model.level(iteration),
            grid_points=model.grid_points(iteration),
            vtime_ns=end,
        )
        snap = ctx.db.snapshot()
        timers = {entry.name: dict(entry.values) for entry in snap.entries}
        path = Path(ctx.checkpoint_dir) / checkpoint_filename(iteration)
        write_checkpoint(path, state, ctx.accounting, timers)
        ctx.files.append(path)


def _decide_and_checkpoint(ctx: _RunContext, phase: str, iteration: int, *,
                           is_initial: bool = False, is_terminal: bool = False) -> None:
    decision = decide(
        ctx.policy, ctx.accounting, ctx.controller.now_ns, iteration,
        is_initial=is_initial, is_terminal=is_terminal,
    )
    ctx.decisions.append(
        DecisionRecord(phase, iteration, decision.verdict, decision.reason)
    )
    if decision.should_checkpoint:
        _perform_checkpoint(ctx, iteration)


def run_experiment(
    model: WorkloadModel,
    policy: CheckpointPolicy,
    *,
    reporting: ReportingConfig | None = None,
    checkpoint_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
    out: TextIO | None = None,
    setup_hook: Callable[[TimerDatabase, Scheduler], Callable[[], None] | None] | None = None,
) -> ExperimentResult:
    """Run the synthetic experiment to completion in virtual time.

    With ``resume_from``, the run restores a checkpoint file and continues
    from the following iteration; the continuation is identical to the
    uninterrupted run from that point on.  ``setup_hook`` runs after the
    schedule is built and before the run starts (used to attach a monitor);
    it may return a teardown callable.
    """
    controller = VirtualClockController()
    registry = ClockRegistry()
    registry.register(VirtualWallClock(controller))
    db = TimerDatabase(registry, wall_ns=lambda: controller.now_ns)
    sched = Scheduler(db)
    accounting = CheckpointAccounting(start_ns=0)
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
    ctx = _RunContext(model, policy, controller, accounting, db, checkpoint_dir)

    def startup(c):
        c.controller.advance_ns(c.model.startup_cost_ns)

    def generate_initial_data(c):
        pass  # placeholder state setup; costs nothing in this model

    def initial_checkpoint(c):
        _decide_and_checkpoint(c, PHASE_INITIAL, 0, is_initial=True)

    def evolve(c):
        c.event = EVENT_REGRID if c.iteration % c.model.regrid_every == 0 else EVENT_NONE
        c.controller.advance_ns(c.model.compute_ns(c.iteration))

    def evolution_checkpoint(c):
        _decide_and_checkpoint(c, PHASE_ITERATION, c.iteration)

    def analysis(c):
        if reporter is not None and reporter.due(c.iteration):
            reporter.emit(c.db.snapshot())

    def terminal_checkpoint(c):
        _decide_and_checkpoint(c, PHASE_TERMINAL, c.model.total_iterations,
                               is_terminal=True)

    def terminate(c):
        c.controller.advance_ns(c.model.terminate_cost_ns)

    sched.register("STARTUP", "Harness", "Startup", startup)
    sched.register("INITIAL", "Harness", "Generate initial data", generate_initial_data)
    sched.register("CHECKPOINT_INITIAL", "AdaptCheck", "Initial data checkpoint",
                   initial_checkpoint)
    sched.register("EVOL", "Workload", "Evolve state", evolve)
    sched.register("CHECKPOINT", "AdaptCheck", "Evolution checkpoint routine",
                   evolution_checkpoint)
    sched.register("ANALYSIS", "Report", "Periodic timer report", analysis)
    sched.register("TERMINATE", "AdaptCheck", "Terminal checkpoint", terminal_checkpoint)
    sched.register("TERMINATE", "Harness", "Shutdown", terminate)

    reporter = PeriodicReporter(reporting, layout=sched.layout, out=out) \
        if reporting is not None else None

    series: list[SeriesRow] = []

    def append_row(iteration: int) -> None:
        now = controller.now_ns
        series.append(SeriesRow(
            iteration=iteration,
            elapsed_ns=now,
            checkpoint_ns_cum=accounting.total_checkpoint_ns,
            fraction=accounting.fraction(now),
            grid_points=model.grid_points(iteration),
            event=ctx.event,
        ))

    first_iteration = 1
    if resume_from is not None:
        data = read_checkpoint(resume_from)
        state = data.state
        if state.iteration > model.total_iterations \
                or state.levels != model.level(state.iteration) \
                or state.grid_points != model.grid_points(state.iteration):
            raise ModelMismatchError(
                f"checkpoint {resume_from} (iteration {state.iteration}, "
                f"levels {state.levels}, {state.grid_points} points) does not "
                f"fit this workload model"
            )
        controller.now_ns = state.vtime_ns
        ctx.accounting = accounting = data.accounting
        for timer_name, clock_values in data.timers.items():
            handle = db.lookup(timer_name)
            if handle is None:
                raise ModelMismatchError(
                    f"checkpoint carries unknown timer {timer_name!r}"
                )
            db.set_raw(handle, clock_values)
        first_iteration = state.iteration + 1

    teardown = setup_hook(db, sched) if setup_hook is not None else None
    try:
        sched.start_simulation()
        if resume_from is None:
            sched.run_bin("STARTUP", ctx)
            sched.run_bin("INITIAL", ctx)
            ctx.event = EVENT_NONE
            sched.run_bin("CHECKPOINT_INITIAL", ctx)
            append_row(0)
        else:
            # The resumed state is the moment just after the checkpoint at
            # iteration `first_iteration - 1` was written, which is exactly
            # where the uninterrupted run's series row for that iteration
            # was taken.
            ctx.event = EVENT_CHECKPOINT
            append_row(first_iteration - 1)

        for iteration in range(first_iteration, model.total_iterations + 1):
            ctx.iteration = iteration
            sched.run_bin("EVOL", ctx)
            sched.run_bin("CHECKPOINT", ctx)
            sched.run_bin("ANALYSIS", ctx)
            append_row(iteration)

        ctx.event = EVENT_NONE
        sched.run_bin("TERMINATE", ctx)
        sched.finish_simulation()
    finally:
        if teardown is not None:
            teardown()

    now = controller.now_ns
    return ExperimentResult(
        model=model,
        policy=policy,
        total_runtime_ns=now,
        total_checkpoint_ns=accounting.total_checkpoint_ns,
        final_fraction=accounting.fraction(now),
        checkpoints_taken=accounting.checkpoints_taken,
        series=series,
        decisions=ctx.decisions,
        snapshot=db.snapshot(),
        layout=sched.layout(),
        checkpoint_files=ctx.files,
    )


def calibrate(model: WorkloadModel, target_fraction: float,
              policy: CheckpointPolicy | None = None,
              tolerance: float = 0.01, max_probes: int = 8) -> WorkloadModel:
    """Choose the checkpoint cost constant so the baseline hits a fraction.

    With a fixed-interval baseline the set of checkpointed iterations does
    not depend on costs, so fraction/(1-fraction) is exactly linear in the
    ratio of checkpoint cost to compute cost; one probe run pins the slope
    and one verification run confirms the target within ``tolerance``.
    """
    if not 0.0 < target_fraction < 1.0:
        raise CalibrationError(
            f"target fraction must be in (0, 1), got {target_fraction}"
        )
    if policy is None:
        policy = CheckpointPolicy.fixed_interval(512)
    if policy.mode != "fixed_interval":
        raise CalibrationError("calibration requires a fixed_interval baseline policy")

    candidate = model.checkpoint_base_ns
    target_odds = target_fraction / (1.0 - target_fraction)
    for _ in range(max_probes):
        probe = dataclasses.replace(model, checkpoint_base_ns=candidate)
        fraction = run_experiment(probe, policy).final_fraction
        if abs(fraction - target_fraction) <= tolerance:
            return probe
        if fraction <= 0.0 or fraction >= 1.0:
            raise CalibrationError(
                "baseline policy never checkpoints on this model; "
                "cannot calibrate"
            )
        odds = fraction / (1.0 - fraction)
        candidate = max(1, round(candidate * target_odds / odds))
    raise CalibrationError(
        f"no checkpoint cost reaches fraction {target_fraction} "
        f"within {max_probes} probes"
    )


@dataclass(frozen=True)
class RunComparison:
    runtime_reduction: float  # (runtime_a - runtime_b) / runtime_a
    checkpoint_time_ratio: float  # checkpoint_a / checkpoint_b
    fraction_curves_csv: str  # iteration,fraction_a,fraction_b

    def describe(self) -> str:
        return (
            f"runtime reduction: {self.runtime_reduction * 100.0:.1f}%\n"
            f"checkpoint-time ratio: {self.checkpoint_time_ratio:.2f}\n"
        )


def compare_runs(a: ExperimentResult, b: ExperimentResult) -> RunComparison:
    """Compare two runs of the same workload model."""
    if a.model is not None and b.model is not None and a.model != b.model:
        raise ModelMismatchError("runs use different workload models")
    if a.total_runtime_ns <= 0:
        raise ValueError("first run has no runtime to compare against")
    reduction = (a.total_runtime_ns - b.total_runtime_ns) / a.total_runtime_ns
    if b.total_checkpoint_ns > 0:
        ratio = a.total_checkpoint_ns / b.total_checkpoint_ns
    else:
        ratio = float("inf")
    fractions_b = {row.iteration: row.fraction for row in b.series}
    lines = ["iteration,fraction_a,fraction_b"]
    for row in a.series:
        if row.iteration in fractions_b:
            lines.append(f"{row.iteration},{row.fraction!r},{fractions_b[row.iteration]!r}")
    return RunComparison(
        runtime_reduction=reduction,
        checkpoint_time_ratio=ratio,
        fraction_curves_csv="\n".join(lines) + "\n",
    )
