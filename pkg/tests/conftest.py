import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

_acceptance_lines = []


@pytest.fixture
def report(request):
    """Record and echo one PASS/FAIL line for an acceptance criterion."""
    tr = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        _acceptance_lines.append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
