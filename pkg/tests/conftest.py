import numpy as np
import pytest

from mhd2d.geometry import Grid, VectorField


@pytest.fixture(scope="session")
def calibration_store():
    """Measured inequality constants; built once for the whole session."""
    from mhd2d.verify import calibrate_constants

    return calibrate_constants()


@pytest.fixture
def grid16():
    return Grid(16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_divfree(grid, rng, scale=1.0):
    psi = np.zeros((grid.nx + 1, grid.ny + 1))
    psi[1:-1, 1:-1] = scale * rng.standard_normal((grid.nx - 1, grid.ny - 1))
    return VectorField.from_stream(grid, psi)


def random_zero_trace(grid, rng, scale=1.0):
    f = VectorField.zeros(grid)
    f.x[1:-1, :] = scale * rng.standard_normal((grid.nx - 1, grid.ny))
    f.y[:, 1:-1] = scale * rng.standard_normal((grid.nx, grid.ny - 1))
    return f
