import sys

import numpy as np
import pytest

from epsense.dynamics import TimeGrid
from epsense.model import DEFAULT_KAPPA_P, DEFAULT_KAPPA_Q, make_params

OMEGA_EP = 1.2325


@pytest.fixture
def ep_params():
    return make_params(OMEGA_EP, DEFAULT_KAPPA_Q, DEFAULT_KAPPA_P)


@pytest.fixture
def default_grid():
    return TimeGrid(0.0, 2.0, 81)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
