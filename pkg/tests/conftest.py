import numpy as np
import pytest

from dgshock.experiments import get_experiment
from dgshock.weakform import discretize


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_case(name, K=None, **overrides):
    exp = get_experiment(name, **overrides)
    K = K or exp.K
    disc = discretize(exp.problem.x_min, exp.problem.x_max, K, exp.N_p, exp.n_gauss)
    return exp, disc


@pytest.fixture(params=["static-discontinuity", "advection-smooth", "advection-jump", "burgers"])
def case(request):
    return make_case(request.param)


# One line per acceptance criterion, echoed in the terminal summary so the
# pass/fail overview is visible without -s.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
