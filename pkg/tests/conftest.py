import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from dyadic_bloom import DyadicGrid  # noqa: E402

SMALL_GRIDS = [((3, 3), (1, 1)), ((2, 3), (2, 1)), ((2, 2), (2, 2)), ((1, 4), (1, 1))]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=SMALL_GRIDS, ids=lambda g: f"K{g[0]}-n{g[1]}")
def grid(request):
    depths, dims = request.param
    return DyadicGrid(depths, dims)


@pytest.fixture
def grid33():
    return DyadicGrid((3, 3), (1, 1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
