"""Shared pytest configuration.

The acceptance suite (tests/test_acceptance.py) gets a one-line
PASS/FAIL summary per criterion at the end of the run so its status is
readable without scrolling through the full pytest output.
"""

from __future__ import annotations

import pytest

ACCEPTANCE_FILE = "test_acceptance.py"


def _criterion_name(nodeid: str) -> str:
    return nodeid.split("::", 1)[-1]


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries: list[tuple[str, str]] = []
    for status, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, []):
            if getattr(report, "when", "call") != "call" and status == "passed":
                continue
            if ACCEPTANCE_FILE in getattr(report, "nodeid", ""):
                entries.append((_criterion_name(report.nodeid), label))
    if not entries:
        return
    seen: set[str] = set()
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, label in sorted(entries):
        if name in seen:
            continue
        seen.add(name)
        terminalreporter.write_line(f"[ACCEPTANCE] {name}: {label}")
