import numpy as np
import pytest

from revuzlab import families
from revuzlab.measures import dirac, uniform

# filled by test_acceptance; echoed once at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def c2():
    return families.two_state()


@pytest.fixture
def c2_killed():
    return families.two_state(killing=(1.0, 1.0))


@pytest.fixture
def path9():
    return families.path(9)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def c2_measures(c2):
    return {"delta_a": dirac(c2, "a"), "delta_b": dirac(c2, "b"), "uniform": uniform(c2)}
