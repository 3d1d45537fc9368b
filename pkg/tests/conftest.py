import time

import numpy as np
import pytest

from exclusion_ldp import verify
from exclusion_ldp.model import ModelParams
from exclusion_ldp.pde import Grid, solve_hydro, stationary_profile
from exclusion_ldp.rate import TrajectoryData

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


class Timed:
    def __init__(self, value, seconds):
        self.value = value
        self.seconds = seconds


@pytest.fixture(scope="session")
def reference_128():
    """(params, tilt, field) of the controlled reference trajectory on 128 cells."""
    return verify.reference_trajectory(128)


@pytest.fixture(scope="session")
def reference_512():
    start = time.perf_counter()
    out = verify.reference_trajectory(512)
    return Timed(out, time.perf_counter() - start)


@pytest.fixture(scope="session")
def hydro_params():
    return ModelParams(1.0, 0.2, 0.8, 64)


@pytest.fixture(scope="session")
def hydro_field(hydro_params):
    """Hydrodynamic solution from a profile compatible with the boundary conditions."""
    g = stationary_profile(hydro_params)
    return solve_hydro(hydro_params, Grid(128, 0.5),
                       lambda x: g(x) + 0.25 * (1 - np.asarray(x) ** 2) ** 2)


@pytest.fixture(scope="session")
def hydro_traj(hydro_field):
    return TrajectoryData.from_field(hydro_field)
