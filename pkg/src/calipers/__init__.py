"""calipers: pluggable-clock timers, auto-timed scheduling, and adaptive checkpointing.

The package has three layers: a timing core (clocks, timers, schedule bins,
reports, HTTP monitor), an adaptive checkpoint controller, and a
deterministic virtual-time experiment harness with a CLI.
"""

from .checkpoint import (
    CheckpointAccounting,
    CheckpointData,
    CheckpointDecision,
    CheckpointPolicy,
    CheckpointState,
    checkpoint_filename,
    decide,
    normalize_fraction,
    read_checkpoint,
    write_checkpoint,
)
from .clocks import (
    CallableClock,
    ClockBackend,
    ClockInstance,
    ClockRegistry,
    ClockValueDescriptor,
    EventCounterClock,
    ProcessCpuClock,
    SystemWallClock,
    VirtualClockController,
    VirtualWallClock,
    make_cycle_clock,
)
from .config import RunConfig, build_run_config, load_config, parse_params
from .errors import (
    CalibrationError,
    CalipersError,
    CheckpointCorruptError,
    CheckpointFileError,
    CheckpointVersionError,
    ClockStateError,
    ConfigError,
    DuplicateNameError,
    ModelMismatchError,
    PolicyError,
    SnapshotFormatError,
    UnknownNameError,
    ValueArityError,
)
from .harness import (
    DecisionRecord,
    ExperimentResult,
    RunComparison,
    SeriesRow,
    WorkloadModel,
    calibrate,
    compare_runs,
    run_experiment,
)
from .monitor import MonitorServer
from .report import (
    PeriodicReporter,
    ReportingConfig,
    format_seconds,
    render_report,
    snapshot_from_json,
    snapshot_to_json,
)
from .schedule import (
    DEFAULT_BINS,
    ReportLayout,
    ReportRow,
    ReportSection,
    Scheduler,
    SIMULATION_TOTAL_TIMER,
    bin_total_timer_name,
    routine_timer_name,
)
from .timers import ClockSpec, SnapshotEntry, Timer, TimerDatabase, TimerSnapshot

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
