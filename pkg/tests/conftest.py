import numpy as np
import pytest

from subharmonic.systems import (ActionAnglePoint, CoupledOscillator, GeneralizedEuler,
                                 LinearOscillator, ResonanceSpec)

SQRT2 = np.sqrt(2.0)
EULER_ZERO = ActionAnglePoint((3.0 / SQRT2, 3.0 / (2.0 * SQRT2)), 0.0)
OSCILLATOR_ZERO = ActionAnglePoint((5.0, 2.0, 1.0), np.pi)

# Filled by tests/test_acceptance.py and echoed in the terminal summary.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def euler():
    return GeneralizedEuler()


@pytest.fixture(scope="session")
def oscillator():
    return CoupledOscillator()


@pytest.fixture(scope="session")
def forced():
    """Linear oscillator with forcing 0.2 and unit nonlinear damping."""
    return LinearOscillator(forcing=0.2, damping=1.0)


@pytest.fixture(scope="session")
def res11():
    return ResonanceSpec(1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
