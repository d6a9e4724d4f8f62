import logging

import numpy as np
import pytest

from dma_swipt.dma import QosTargets, WaveguideModel, propagation_diagonal
from dma_swipt.energy import EhModel
from dma_swipt.geometry import half_wavelength_geometry


@pytest.fixture(autouse=True)
def _quiet_rank_warnings(caplog):
    logging.getLogger("dma_swipt").setLevel(logging.ERROR)
    yield


@pytest.fixture(scope="session")
def desk_geometry():
    return half_wavelength_geometry(28e9, 4, 8)


@pytest.fixture(scope="session")
def desk_waveguide(desk_geometry):
    return WaveguideModel.uniform(desk_geometry, 0.6, 827.67)


@pytest.fixture(scope="session")
def desk_h(desk_geometry, desk_waveguide):
    return propagation_diagonal(desk_waveguide, desk_geometry)


@pytest.fixture(scope="session")
def two_user_targets():
    return QosTargets.broadcast(2, 10.0, 1e-4, 1e-10, 1e-8)


def boresight_users(geometry, fractions):
    d_f = geometry.fraunhofer_distance
    return np.array([[0.0, 0.0, f * d_f] for f in fractions])


@pytest.fixture(scope="session")
def linear_eh():
    return EhModel.linear(0.5)
