"""Shared fixtures.

Everything here is deterministic: fixed seeds, session scope for the
objects that are expensive to build (kernels triggering calibration,
Cholesky factors, spectral models), so the cost is paid once.
"""

import numpy as np
import pytest

from volterra_spde.kernels import make_fbm_kernel
from volterra_spde.processes import TimeGrid, simulate_fbm
from volterra_spde.spde import NoiseOperator, build_model


@pytest.fixture(scope="session")
def kernel_075():
    return make_fbm_kernel(0.75)


@pytest.fixture(scope="session")
def grid_256():
    return TimeGrid.regular(1.0, 256)


@pytest.fixture(scope="session")
def fbm_ens_075(grid_256):
    """2000 fBm paths, H = 0.75, shared across isometry-style tests."""
    return simulate_fbm(0.75, grid_256, replicas=2000, seed=424242)


@pytest.fixture(scope="session")
def model_16():
    return build_model(np.pi, 1, 16, 128)


@pytest.fixture(scope="session")
def noise_ones_16():
    return NoiseOperator(kind="diagonal", phi_k=np.ones(16))
