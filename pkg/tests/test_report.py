"""Report rendering, JSON round-trips, and periodic emission."""

import io
import json
import logging

import pytest

from calipers import (
    ClockSpec,
    PeriodicReporter,
    ReportingConfig,
    ReportLayout,
    ReportRow,
    ReportSection,
    SnapshotEntry,
    SnapshotFormatError,
    TimerSnapshot,
    format_seconds,
    render_report,
    snapshot_from_json,
    snapshot_to_json,
)

WALL = ClockSpec(name="wall", units=("seconds",), value_names=("elapsed",))
COUNT = ClockSpec(name="events", units=("count",), value_names=("events",))


def make_snapshot(values, clocks=(WALL,), running=(), taken_at_ns=0):
    entries = tuple(
        SnapshotEntry(
            name=name,
            running=name in running,
            values={spec.name: tuple(vector) for spec, vector in zip(clocks, vectors)},
        )
        for name, vectors in values
    )
    return TimerSnapshot(taken_at_ns=taken_at_ns, clocks=tuple(clocks), entries=entries)


class TestFormatSeconds:
    @pytest.mark.parametrize(
        "ns,text",
        [
            (0, "0.00000000"),
            (1, "0.00000000"),  # below the 8-decimal resolution
            (10, "0.00000001"),
            (79_763_280_000, "79.76328000"),
            (13_666_922_000, "13.66692200"),
            (1_417_137_309_000, "1417.13730900"),
            (1_000_000_000, "1.00000000"),
        ],
    )
    def test_exact_eight_decimals(self, ns, text):
        assert format_seconds(ns) == text


class TestRenderLayout:
    def layout(self):
        return ReportLayout(
            sections=(
                ReportSection(
                    rows=(ReportRow("IO", "Write checkpoint", "IO: Write checkpoint"),),
                    total_timer="Total time for CHECKPOINT",
                ),
            ),
        )

    def snapshot(self):
        return make_snapshot(
            [
                ("IO: Write checkpoint", [(79_763_280_000,)]),
                ("Total time for CHECKPOINT", [(79_763_280_000,)]),
                ("Total time for simulation", [(1_417_137_309_000,)]),
            ]
        )

    def test_structure(self):
        text = render_report(self.snapshot(), self.layout())
        lines = text.split("\n")
        width = len(lines[0])
        assert all(len(line) == width for line in lines)
        assert lines[0].startswith("Thorn")
        assert "Scheduled routine in time bin" in lines[0]
        assert "wall [secs]" in lines[0]
        assert lines[1] == "=" * width
        assert lines[2].startswith("IO")
        assert "79.76328000" in lines[2]
        assert lines[3] == "-" * width
        assert "Total time for CHECKPOINT" in lines[4]
        assert lines[5] == "=" * width
        assert "Total time for simulation" in lines[6]
        assert "1417.13730900" in lines[6]
        assert lines[7] == "=" * width

    def test_columns_are_pipe_separated_and_right_aligned(self):
        text = render_report(self.snapshot(), self.layout())
        header, _, row = text.split("\n")[:3]
        assert header.count("|") == row.count("|") == 2
        value_cell = row.split("|")[2]
        assert value_cell.endswith("79.76328000 ")
        assert value_cell.startswith(" ")

    def test_layout_row_missing_from_snapshot_renders_zero(self):
        layout = ReportLayout(
            sections=(
                ReportSection(
                    rows=(ReportRow("Ghost", "not measured", "Ghost: not measured"),),
                    total_timer=None,
                ),
            ),
        )
        text = render_report(make_snapshot([]), layout)
        row = text.split("\n")[2]
        assert "Ghost" in row and "0.00000000" in row

    def test_simulation_total_defaults_to_zero_when_absent(self):
        text = render_report(make_snapshot([]), None)
        lines = text.split("\n")
        assert "Total time for simulation" in lines[2]
        assert "0.00000000" in lines[2]

    def test_extras_block_lists_unconsumed_timers(self):
        snapshot = make_snapshot(
            [
                ("IO: Write checkpoint", [(1_000_000_000,)]),
                ("Total time for CHECKPOINT", [(1_000_000_000,)]),
                ("AdaptCheck: Startup banner", [(13_000,)]),
                ("standalone", [(500,)]),
            ]
        )
        text = render_report(snapshot, self.layout())
        lines = text.split("\n")
        extras = [ln for ln in lines if "Startup banner" in ln or "standalone" in ln]
        assert len(extras) == 2
        # Conventional "Thorn: routine" names split back into their columns.
        assert extras[0].split("|")[0].strip() == "AdaptCheck"
        assert extras[0].split("|")[1].strip() == "Startup banner"
        # Names without the separator land whole in the routine column.
        assert extras[1].split("|")[0].strip() == ""
        assert extras[1].split("|")[1].strip() == "standalone"

    def test_count_clock_formats_as_integer(self):
        snapshot = make_snapshot(
            [("T: r", [(2_500_000_000,), (42,)])], clocks=(WALL, COUNT)
        )
        layout = ReportLayout(
            sections=(
                ReportSection(rows=(ReportRow("T", "r", "T: r"),), total_timer=None),
            ),
        )
        text = render_report(snapshot, layout)
        header, _, row = text.split("\n")[:3]
        assert "events [count]" in header
        cells = [c.strip() for c in row.split("|")]
        assert cells == ["T", "r", "2.50000000", "42"]

    def test_multi_value_clock_headers_name_each_value(self):
        spec = ClockSpec(
            name="rusage", units=("seconds", "seconds"), value_names=("user", "system")
        )
        snapshot = make_snapshot([("T: r", [(10**9, 2 * 10**9)])], clocks=(spec,))
        header = render_report(snapshot, None).split("\n")[0]
        assert "rusage:user [secs]" in header
        assert "rusage:system [secs]" in header

    def test_wide_value_widens_column(self):
        snapshot = make_snapshot(
            [("T: r", [(1_234_567_891_234_567_890,)])],
        )
        text = render_report(snapshot, None)
        lines = text.split("\n")
        assert "1234567891.23456789" in text
        assert all(len(ln) == len(lines[0]) for ln in lines)


class TestJsonRoundTrip:
    def snapshot(self):
        return make_snapshot(
            [
                ("b-timer", [(123,), (7,)]),
                ("a-timer", [(456,), (0,)]),
            ],
            clocks=(WALL, COUNT),
            running=("a-timer",),
            taken_at_ns=999,
        )

    def test_canonical_form(self):
        text = snapshot_to_json(self.snapshot())
        assert "\n" not in text and ": " not in text and ", " not in text
        assert text == json.dumps(json.loads(text), sort_keys=True, separators=(",", ":"))

    def test_round_trip_is_byte_identical(self):
        text = snapshot_to_json(self.snapshot())
        assert snapshot_to_json(snapshot_from_json(text)) == text

    def test_round_trip_preserves_structure(self):
        restored = snapshot_from_json(snapshot_to_json(self.snapshot()))
        assert restored.taken_at_ns == 999
        assert [c.name for c in restored.clocks] == ["wall", "events"]
        assert [e.name for e in restored.entries] == ["b-timer", "a-timer"]
        assert restored.entries[1].running
        assert restored.entries[0].values["wall"] == (123,)

    def test_raw_integers_not_floats(self):
        doc = json.loads(snapshot_to_json(self.snapshot()))
        value = doc["timers"][0]["values"]["wall"][0]
        assert isinstance(value, int)

    def test_invalid_json_rejected(self):
        with pytest.raises(SnapshotFormatError):
            snapshot_from_json("{not json")

    @pytest.mark.parametrize(
        "text",
        [
            '{"taken_at_ns":0}',
            '{"taken_at_ns":0,"clocks":[],"timers":[{"name":"t"}]}',
            '{"taken_at_ns":"soon","clocks":[],"timers":[]}',
            '[]',
        ],
    )
    def test_malformed_documents_rejected(self, text):
        with pytest.raises(SnapshotFormatError):
            snapshot_from_json(text)


class TestReportingConfig:
    def test_defaults(self):
        config = ReportingConfig()
        assert config.mode == "off" and config.period == 512

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mode": "sometimes"},
            {"period": 0},
            {"sinks": ("pigeon",)},
            {"sinks": ("logfile",)},
            {"sinks": ("export",)},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            ReportingConfig(**kwargs)


class TestPeriodicReporter:
    def reporter(self, tmp_path=None, **kwargs):
        out = io.StringIO()
        config = ReportingConfig(mode="full", period=10, **kwargs)
        return PeriodicReporter(config, layout=None, out=out), out

    def test_due_iterations(self):
        reporter, _ = self.reporter()
        due = [it for it in range(31) if reporter.due(it)]
        assert due == [0, 10, 20, 30]

    def test_off_mode_never_due(self):
        reporter = PeriodicReporter(ReportingConfig(mode="off"))
        assert not any(reporter.due(it) for it in range(100))

    def test_maybe_emit_writes_report(self):
        reporter, out = self.reporter()
        snapshot = make_snapshot([("T: r", [(10**9,)])])
        assert reporter.maybe_emit(10, snapshot)
        assert not reporter.maybe_emit(11, snapshot)
        assert out.getvalue().count("Total time for simulation") == 1
        assert "1.00000000" in out.getvalue()

    def test_export_sink_appends_canonical_jsonl(self, tmp_path):
        path = tmp_path / "timers.jsonl"
        config = ReportingConfig(mode="full", period=1, sinks=("export",), export_path=path)
        reporter = PeriodicReporter(config)
        snapshot = make_snapshot([("T: r", [(5,)])], taken_at_ns=1)
        reporter.emit(snapshot)
        reporter.emit(snapshot)
        lines = path.read_text().splitlines()
        assert lines == [snapshot_to_json(snapshot)] * 2

    def test_logfile_sink_appends_text(self, tmp_path):
        path = tmp_path / "report.log"
        config = ReportingConfig(mode="full", period=1, sinks=("logfile",), logfile=path)
        reporter = PeriodicReporter(config)
        reporter.emit(make_snapshot([]))
        reporter.emit(make_snapshot([]))
        assert path.read_text().count("Total time for simulation") == 2

    def test_sink_failure_warns_once_and_does_not_raise(self, tmp_path, caplog):
        missing = tmp_path / "no-such-dir" / "timers.jsonl"
        config = ReportingConfig(
            mode="full", period=1, sinks=("export",), export_path=missing
        )
        reporter = PeriodicReporter(config)
        snapshot = make_snapshot([])
        with caplog.at_level(logging.WARNING, logger="calipers.report"):
            reporter.emit(snapshot)
            reporter.emit(snapshot)
        warnings = [r for r in caplog.records if "export" in r.getMessage()]
        assert len(warnings) == 1

    def test_failing_sink_does_not_block_others(self, tmp_path, caplog):
        missing = tmp_path / "no-such-dir" / "timers.jsonl"
        out = io.StringIO()
        config = ReportingConfig(
            mode="full", period=1, sinks=("export", "stdout"), export_path=missing
        )
        reporter = PeriodicReporter(config, out=out)
        with caplog.at_level(logging.WARNING, logger="calipers.report"):
            reporter.emit(make_snapshot([]))
        assert "Total time for simulation" in out.getvalue()

    def test_layout_callable_resolved_at_emit_time(self):
        out = io.StringIO()
        calls = []

        def layout():
            calls.append(True)
            return ReportLayout(sections=())

        config = ReportingConfig(mode="full", period=1)
        reporter = PeriodicReporter(config, layout=layout, out=out)
        reporter.emit(make_snapshot([]))
        assert calls == [True]
