import numpy as np
import pytest
from hypothesis import settings

from pathgreeks import Path, make_grid

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def grid4():
    return make_grid(1.0, 4)


@pytest.fixture
def ramp(grid4):
    return Path(grid4, [1.0, 2.0, 3.0, 4.0, 5.0])


def brownian_path(seed, n=50, T=1.0):
    rng = np.random.default_rng(seed)
    g = make_grid(T, n)
    w = np.concatenate(([0.0], np.cumsum(rng.standard_normal(n) * np.sqrt(g.dt))))
    return Path(g, w)


# criterion lines recorded by test_acceptance, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
