import numpy as np
import pytest

from irs_cascade.geometry import UpaDims


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def dims4():
    return UpaDims(4, 4)


_criteria = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict."""
    def _record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _criteria.append((number, line))
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_criteria):
            terminalreporter.write_line(line)
