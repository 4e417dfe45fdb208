"""Prints one PASS/FAIL/SKIP line per acceptance criterion after the run."""

import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, name): acceptance criterion check")


def pytest_runtest_logreport(report):
    item_marker = getattr(report, "_acceptance", None)
    if item_marker is None:
        return
    key = item_marker
    prev = _results.get(key, "PASS")
    if report.failed:
        _results[key] = "FAIL"
    elif report.skipped and report.when in ("setup", "call"):
        _results[key] = "SKIP" if prev != "FAIL" else prev
    elif report.when == "call" and report.passed:
        _results.setdefault(key, "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        outcome.get_result()._acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for (number, name), status in sorted(_results.items()):
        terminalreporter.write_line(f"ACCEPTANCE {number:>2} {name}: {status}")
