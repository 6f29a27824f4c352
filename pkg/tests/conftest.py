"""Shared fixtures plus the acceptance-criteria summary plugin.

Tests marked @pytest.mark.criterion(N, "title") feed a summary table
printed after the run: one PASS/FAIL line per criterion. A criterion
backed by several tests passes only if all of them pass.
"""

from __future__ import annotations

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(n, title): marks a test as part of acceptance criterion n",
    )
    config.addinivalue_line(
        "markers", "stress: long-running concurrency stress test"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num = marker.args[0]
    title = marker.args[1] if len(marker.args) > 1 else ""
    slot = _RESULTS.setdefault(num, {"title": title, "failed": 0,
                                     "passed": 0, "skipped": 0})
    if rep.when == "call":
        if rep.passed:
            slot["passed"] += 1
        elif rep.skipped:
            slot["skipped"] += 1
        else:
            slot["failed"] += 1
    elif rep.when == "setup" and (rep.failed or rep.skipped):
        if rep.failed:
            slot["failed"] += 1
        else:
            slot["skipped"] += 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_RESULTS):
        slot = _RESULTS[num]
        if slot["failed"]:
            verdict = "FAIL"
        elif slot["passed"]:
            verdict = "PASS"
        else:
            verdict = "SKIP"
        tr.write_line(f"criterion {num:>2}: {verdict}  {slot['title']}")
