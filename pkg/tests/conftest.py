import numpy as np
import pytest

from chevron import _backend
from chevron.model import Grid1D, Parameters1D, State1D

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid():
    return Grid1D.from_length(10.0, 32, 0.05)


@pytest.fixture
def small_params():
    return Parameters1D(tau=1.0, d1=1.0, h=0.1, length=10.0)


def random_state(rng, grid, scale=1.0):
    m = grid.n - 1
    a = scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return State1D.from_interior(a, scale * rng.standard_normal(m))


@pytest.fixture(params=_backend.available())
def backend(request):
    previous = _backend.use_backend(request.param)
    yield request.param
    _backend.use_backend(previous)
