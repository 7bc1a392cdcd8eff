import re

import pytest

_CRITERION = re.compile(r"test_c(\d+)_")
_lines = {}


@pytest.fixture
def criterion():
    """``report(n, ok, detail)``: record the PASS/FAIL line of criterion n, then assert."""

    def report(n, ok, detail):
        line = f"C{n} {'PASS' if ok else 'FAIL'}: {detail}"
        _lines[n] = line
        print(line)
        assert ok, line

    return report


def pytest_runtest_logreport(report):
    # a criterion that errors before reporting still gets its FAIL line
    m = _CRITERION.search(report.nodeid)
    if m and report.failed and int(m.group(1)) not in _lines:
        msg = str(report.longrepr).strip().splitlines()[-1] if report.longrepr else report.outcome
        _lines[int(m.group(1))] = f"C{m.group(1)} FAIL: {msg}"


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_lines):
            terminalreporter.write_line(_lines[n])
