import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from exochemo.grid import Grid  # noqa: E402
from exochemo.stationary import ModelParams, solve_stationary  # noqa: E402


@pytest.fixture(scope="session")
def grid401():
    return Grid(401)


@pytest.fixture(scope="session")
def model01():
    return ModelParams(D=0.1, v_star=1.0, M=1.0)


@pytest.fixture(scope="session")
def stat01(model01, grid401):
    return solve_stationary(model01, grid401)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
