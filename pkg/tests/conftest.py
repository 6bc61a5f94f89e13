import json
import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).with_name("fixtures")
_LINES = {}


def record(criterion, ok, detail):
    """Register the pass/fail line of an acceptance criterion."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    _LINES[criterion] = line
    print(line)
    return ok


@pytest.fixture(scope="session")
def tpn_fixture():
    return json.loads((FIXTURES / "tpn_fixture.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])
