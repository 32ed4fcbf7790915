import numpy as np
import pytest

from qjump.collision import BathParams
from qjump.operators import GridSpec, make_gaussian_state


@pytest.fixture(scope="session")
def grid():
    return GridSpec(10.0, 256)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(16.0, 128)


@pytest.fixture(scope="session")
def params():
    return BathParams()


@pytest.fixture(scope="session")
def rho0(grid):
    return make_gaussian_state(grid, 0.0, 0.0, 0.5)


def random_mixed(grid, rng, rank=3):
    """Random positive unit-trace kernel built from smooth packets."""
    x = grid.positions
    vecs = []
    for _ in range(rank):
        c, p, w = rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.4, 1.0)
        vecs.append(np.exp(-((x - c) ** 2) / (4 * w * w) + 1j * p * x))
    V = np.array(vecs).T
    lam = rng.dirichlet(np.ones(rank))
    rho = (V * lam) @ V.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / (np.trace(rho).real * grid.spacing)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
