"""Parameter files: line-based ``section::key = value`` pairs.

The format follows the classic simulation parameter-file style: one
assignment per line, ``#`` starts a comment, values may be double-quoted.
Unknown keys are hard errors so typos surface immediately.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .checkpoint import CheckpointPolicy, normalize_fraction
from .errors import ConfigError
from .harness import WorkloadModel
from .report import ReportingConfig

NS_PER_SECOND = 10**9


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs, parsed and validated."""

    model: WorkloadModel
    policy: CheckpointPolicy
    reporting: ReportingConfig
    checkpoint_dir: Path | None = None
    listen: tuple[str, int] | None = None
    fraction_clock: str = "virtual-wall"


def parse_params(text: str) -> dict[tuple[str, str], str]:
    """Parse raw assignments; later assignments to a key override earlier."""
    params: dict[tuple[str, str], str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section::key = value', got {raw_line!r}")
        key_part, value = line.split("=", 1)
        key_part = key_part.strip()
        if "::" not in key_part:
            raise ConfigError(f"line {lineno}: key {key_part!r} is missing its 'section::'")
        section, key = key_part.split("::", 1)
        section, key = section.strip(), key.strip()
        if not section or not key:
            raise ConfigError(f"line {lineno}: empty section or key in {raw_line!r}")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        params[(section, key)] = value
    return params


def _parse_int(name: str, value: str, minimum: int) -> int:
    try:
        parsed = int(value)
    except ValueError:
        raise ConfigError(f"{name}: expected an integer, got {value!r}") from None
    if parsed < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {parsed}")
    return parsed


def _parse_seconds_ns(name: str, value: str, minimum_ns: int = 0) -> int:
    try:
        ns = int((Decimal(value) * NS_PER_SECOND).to_integral_value())
    except InvalidOperation:
        raise ConfigError(f"{name}: expected seconds as a decimal, got {value!r}") from None
    if ns < minimum_ns:
        raise ConfigError(f"{name}: must be >= {minimum_ns} ns, got {ns} ns")
    return ns


def _parse_bool(name: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("yes", "true", "1", "on"):
        return True
    if lowered in ("no", "false", "0", "off"):
        return False
    raise ConfigError(f"{name}: expected yes/no, got {value!r}")


def parse_listen(name: str, value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"{name}: expected host:port, got {value!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"{name}: bad port in {value!r}") from None


_KNOWN_KEYS = {
    ("cactus", "print_timing_info"),
    ("report", "period"),
    ("report", "sinks"),
    ("report", "logfile"),
    ("report", "export"),
    ("report", "listen"),
    ("checkpoint", "mode"),
    ("checkpoint", "every"),
    ("checkpoint", "on_initial"),
    ("checkpoint", "on_terminate"),
    ("checkpoint", "dir"),
    ("adaptcheck", "max_checkpoint_fraction"),
    ("adaptcheck", "max_checkpoint_interval"),
    ("adaptcheck", "clock"),
    ("workload", "total_iterations"),
    ("workload", "regrid_every"),
    ("workload", "base_points"),
    ("workload", "points_per_level"),
    ("workload", "compute_unit"),
    ("workload", "checkpoint_base"),
    ("workload", "startup_cost"),
    ("workload", "terminate_cost"),
}


def build_run_config(params: dict[tuple[str, str], str]) -> RunConfig:
    """Validate raw parameters and assemble a :class:`RunConfig`."""
    unknown = sorted(f"{s}::{k}" for (s, k) in params if (s, k) not in _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown parameter(s): {', '.join(unknown)}")

    def get(section: str, key: str, default: str | None = None) -> str | None:
        return params.get((section, key), default)

    # Workload model
    model_kwargs = {}
    for key, field_name, minimum in (
        ("total_iterations", "total_iterations", 0),
        ("regrid_every", "regrid_every", 1),
        ("base_points", "base_points", 1),
        ("points_per_level", "points_per_level", 1),
    ):
        raw = get("workload", key)
        if raw is not None:
            model_kwargs[field_name] = _parse_int(f"workload::{key}", raw, minimum)
    for key, field_name, minimum_ns in (
        ("compute_unit", "compute_unit_ns", 1),
        ("checkpoint_base", "checkpoint_base_ns", 1),
        ("startup_cost", "startup_cost_ns", 0),
        ("terminate_cost", "terminate_cost_ns", 0),
    ):
        raw = get("workload", key)
        if raw is not None:
            model_kwargs[field_name] = _parse_seconds_ns(f"workload::{key}", raw, minimum_ns)
    try:
        model = WorkloadModel(**model_kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid workload model: {exc}") from exc

    # Checkpoint policy
    mode = get("checkpoint", "mode", "fixed_interval")
    on_initial = _parse_bool("checkpoint::on_initial", get("checkpoint", "on_initial", "no"))
    on_terminate = _parse_bool(
        "checkpoint::on_terminate", get("checkpoint", "on_terminate", "no")
    )
    every_raw = get("checkpoint", "every")
    fraction_raw = get("adaptcheck", "max_checkpoint_fraction")
    interval_raw = get("adaptcheck", "max_checkpoint_interval")
    if mode == "fixed_interval":
        for present, key in ((fraction_raw, "adaptcheck::max_checkpoint_fraction"),
                             (interval_raw, "adaptcheck::max_checkpoint_interval")):
            if present is not None:
                raise ConfigError(f"{key} requires checkpoint::mode = adaptive")
        every = _parse_int("checkpoint::every", every_raw or "512", 1)
        policy = CheckpointPolicy.fixed_interval(
            every, on_initial=on_initial, on_terminate=on_terminate
        )
    elif mode == "adaptive":
        if every_raw is not None:
            raise ConfigError("checkpoint::every requires checkpoint::mode = fixed_interval")
        if fraction_raw is None:
            raise ConfigError("adaptive mode needs adaptcheck::max_checkpoint_fraction")
        try:
            fraction = normalize_fraction(fraction_raw)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(
                f"adaptcheck::max_checkpoint_fraction: bad value {fraction_raw!r}"
            ) from None
        if interval_raw is None or interval_raw.lower() == "infinite":
            interval_ns = None
        else:
            interval_ns = _parse_seconds_ns(
                "adaptcheck::max_checkpoint_interval", interval_raw, 1
            )
        try:
            policy = CheckpointPolicy.adaptive(
                fraction, max_interval_ns=interval_ns,
                on_initial=on_initial, on_terminate=on_terminate,
            )
        except Exception as exc:
            raise ConfigError(f"invalid adaptive policy: {exc}") from exc
    else:
        raise ConfigError(
            f"checkpoint::mode must be fixed_interval or adaptive, got {mode!r}"
        )

    # Reporting
    timing_info = get("cactus", "print_timing_info", "off")
    if timing_info not in ("off", "full"):
        raise ConfigError(
            f"cactus::print_timing_info must be off or full, got {timing_info!r}"
        )
    sinks_raw = get("report", "sinks", "stdout")
    sinks = tuple(s.strip() for s in sinks_raw.split(",") if s.strip())
    logfile = get("report", "logfile")
    export = get("report", "export")
    try:
        reporting = ReportingConfig(
            mode=timing_info,
            period=_parse_int("report::period", get("report", "period", "512"), 1),
            sinks=sinks,
            logfile=Path(logfile) if logfile else None,
            export_path=Path(export) if export else None,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid report settings: {exc}") from exc

    listen_raw = get("report", "listen")
    listen = parse_listen("report::listen", listen_raw) if listen_raw else None
    ckpt_dir = get("checkpoint", "dir")

    fraction_clock = get("adaptcheck", "clock", "virtual-wall")
    if fraction_clock != "virtual-wall":
        raise ConfigError(
            "adaptcheck::clock: the synthetic harness measures the checkpoint "
            "fraction on the 'virtual-wall' clock only"
        )

    return RunConfig(
        model=model,
        policy=policy,
        reporting=reporting,
        checkpoint_dir=Path(ckpt_dir) if ckpt_dir else None,
        listen=listen,
        fraction_clock=fraction_clock,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and parse a parameter file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_run_config(parse_params(text))
