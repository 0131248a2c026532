import numpy as np
import pytest

from nonlocal_tse.core import FDParams, Grid


@pytest.fixture
def fd():
    return FDParams(54.30, 0.11)


@pytest.fixture
def grid():
    return Grid.from_cells(0.0, 20.0, 120, 0.0, 5.0, 60)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance verdicts, printed as one line each at the end of the session
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in VERDICTS:
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {detail}")
