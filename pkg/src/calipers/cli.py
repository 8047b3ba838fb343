"""Command-line driver for the synthetic experiment harness."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import RunConfig, load_config, parse_listen
from .errors import CalipersError, ConfigError, SnapshotFormatError
from .harness import (
    ExperimentResult,
    SERIES_HEADER,
    SeriesRow,
    WorkloadModel,
    compare_runs,
    run_experiment,
)
from .monitor import MonitorServer
from .report import render_report, snapshot_from_json


def _write_outputs(result: ExperimentResult, out_dir: Path, name: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for suffix, text in (
        (".series.csv", result.series_csv()),
        (".summary.json", result.summary_json()),
        (".report.txt", result.report_text() + "\n"),
    ):
        path = out_dir / f"{name}{suffix}"
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def _print_run_summary(result: ExperimentResult, written: list[Path]) -> None:
    print(f"total runtime:         {result.total_runtime_s:.6f} s (virtual)")
    print(f"total checkpoint time: {result.total_checkpoint_s:.6f} s (virtual)")
    print(f"checkpoint fraction:   {result.final_fraction:.6f}")
    print(f"checkpoints taken:     {result.checkpoints_taken}")
    for path in written:
        print(f"wrote {path}")


def _execute(config: RunConfig, args, name: str,
             resume_from: Path | None = None, setup_hook=None) -> ExperimentResult:
    result = run_experiment(
        config.model,
        config.policy,
        reporting=config.reporting,
        checkpoint_dir=config.checkpoint_dir,
        resume_from=resume_from,
        setup_hook=setup_hook,
    )
    written = _write_outputs(result, Path(args.out_dir), name)
    if not args.quiet:
        _print_run_summary(result, written)
    return result


def _cmd_run(args) -> int:
    config = load_config(args.config)
    _execute(config, args, Path(args.config).stem)
    return 0


def _cmd_restart(args) -> int:
    checkpoint_path = Path(args.checkpoint)
    if not checkpoint_path.is_file():
        raise ConfigError(f"checkpoint file not found: {checkpoint_path}")
    config = load_config(args.config)
    _execute(config, args, Path(args.config).stem + "-restart",
             resume_from=checkpoint_path)
    return 0


def _load_result(prefix: str) -> ExperimentResult:
    """Rebuild enough of a result from its output files to compare runs."""
    if prefix.endswith(".summary.json"):
        prefix = prefix[: -len(".summary.json")]
    summary_path = Path(prefix + ".summary.json")
    series_path = Path(prefix + ".series.csv")
    for path in (summary_path, series_path):
        if not path.is_file():
            raise ConfigError(f"run output not found: {path}")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    series = []
    lines = series_path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SERIES_HEADER:
        raise ConfigError(f"{series_path}: unrecognized series header")
    for line in lines[1:]:
        it, elapsed, ckpt, fraction, points, event = line.split(",")
        series.append(SeriesRow(int(it), int(elapsed), int(ckpt),
                                float(fraction), int(points), event))
    model = WorkloadModel(**summary["model"]) if summary.get("model") else None
    return ExperimentResult(
        model=model,
        total_runtime_ns=summary["total_runtime_ns"],
        total_checkpoint_ns=summary["total_checkpoint_ns"],
        final_fraction=summary["final_fraction"],
        checkpoints_taken=summary["checkpoints_taken"],
        series=series,
    )


def _cmd_compare(args) -> int:
    result_a = _load_result(args.run_a)
    result_b = _load_result(args.run_b)
    comparison = compare_runs(result_a, result_b)
    sys.stdout.write(comparison.describe())
    curves = Path(args.curves) if args.curves else None
    if curves is not None:
        curves.write_text(comparison.fraction_curves_csv, encoding="utf-8")
        print(f"wrote {curves}")
    return 0


def _cmd_report(args) -> int:
    path = Path(args.snapshot)
    if not path.is_file():
        raise ConfigError(f"snapshot file not found: {path}")
    text = path.read_text(encoding="utf-8").strip()
    try:
        snapshots = [snapshot_from_json(text)]
    except SnapshotFormatError:
        # The export sink appends one JSON document per line.
        snapshots = [snapshot_from_json(line)
                     for line in text.splitlines() if line.strip()]
    print("\n\n".join(render_report(snap) for snap in snapshots))
    return 0


def _cmd_serve(args) -> int:
    config = load_config(args.config)
    listen = config.listen
    if args.listen:
        listen = parse_listen("--listen", args.listen)
    if listen is None:
        raise ConfigError("serve needs report::listen in the config or --listen host:port")

    server_holder: list[MonitorServer] = []

    def setup_hook(db, sched):
        server = MonitorServer(db, sched.layout, host=listen[0], port=listen[1])
        server.start()
        server_holder.append(server)
        host, port = server.address
        print(f"monitor listening on http://{host}:{port}", flush=True)
        return None  # keep serving after the run finishes

    try:
        _execute(config, args, Path(args.config).stem, setup_hook=setup_hook)
        if args.hold is not None:
            time.sleep(args.hold)
        else:
            print("run finished; serving until interrupted", flush=True)
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        for server in server_holder:
            server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calipers",
        description="Synthetic adaptive-checkpointing experiments in virtual time.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out-dir", default=".", help="directory for result files")
        p.add_argument("--quiet", action="store_true", help="suppress the run summary")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; the workload is deterministic")

    p_run = sub.add_parser("run", help="run an experiment from a parameter file")
    p_run.add_argument("config")
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_restart = sub.add_parser("restart", help="resume a run from a checkpoint file")
    p_restart.add_argument("checkpoint")
    p_restart.add_argument("config")
    add_common(p_restart)
    p_restart.set_defaults(func=_cmd_restart)

    p_compare = sub.add_parser("compare", help="compare two runs' output files")
    p_compare.add_argument("run_a", help="run output prefix or .summary.json path")
    p_compare.add_argument("run_b", help="run output prefix or .summary.json path")
    p_compare.add_argument("--curves", default=None,
                           help="write per-iteration fraction curves CSV here")
    p_compare.set_defaults(func=_cmd_compare)

    p_report = sub.add_parser("report", help="render an exported snapshot as text")
    p_report.add_argument("snapshot")
    p_report.set_defaults(func=_cmd_report)

    p_serve = sub.add_parser("serve", help="run with a live monitoring endpoint")
    p_serve.add_argument("config")
    p_serve.add_argument("--listen", default=None, help="host:port (overrides config)")
    p_serve.add_argument("--hold", type=float, default=None,
                         help="keep serving this many seconds after the run")
    add_common(p_serve)
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CalipersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
