"""Shared test helpers: acceptance-criterion result reporting."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criterion_lines: list[tuple[int, str]] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Register one acceptance criterion outcome for the terminal summary."""
    status = "PASS" if passed else "FAIL"
    _criterion_lines.append((number, f"criterion {number}: {status} — {detail}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criterion_lines):
        terminalreporter.write_line(line)
