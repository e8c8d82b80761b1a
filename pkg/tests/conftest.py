import re

import pytest

from daemonsim.experiment import run

_acceptance: dict = {}


@pytest.fixture(scope="session")
def run_cache():
    """Metric rows shared by every test in the session, keyed by config cell."""
    return {}


@pytest.fixture(scope="session")
def runner(run_cache):
    def go(cfg):
        return {row.scheme: row for row in run(cfg, cache=run_cache)}
    return go


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        # a parametrized criterion passes only if every case passes
        if _acceptance.get(key, "passed") == "passed":
            _acceptance[key] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), outcome in sorted(_acceptance.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {name.replace('_', ' ')}: {verdict}")
