import pytest
from hypothesis import settings

from helpers import ACCEPTANCE_LINES, GAMMA, OMEGA, PERIOD, SHIFT, TAU
from pulsed_oscillator.model import DriveSpec, SystemParams, TimeGrid

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def params():
    return SystemParams.from_omega(GAMMA, OMEGA)


@pytest.fixture
def dc():
    return DriveSpec.dirac_comb(PERIOD, SHIFT)


@pytest.fixture
def sp():
    return DriveSpec.square_train(PERIOD, TAU, SHIFT)


@pytest.fixture
def gp():
    return DriveSpec.gaussian_train(PERIOD, TAU, SHIFT)


@pytest.fixture
def grid():
    return TimeGrid(0.0, 6.0 * PERIOD, 6000)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
