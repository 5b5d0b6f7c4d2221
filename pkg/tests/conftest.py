from pathlib import Path

import numpy as np
import pytest

from procmetric.channels import bit_flip, depolarizing, identity_channel, unitary_channel, PAULI_Z
from procmetric.models import OptimizerConfig

CHANNEL_DIR = Path(__file__).resolve().parent.parent / "example_data" / "channels"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fast_config():
    """Few starts and a short iteration cap; enough for qubit fixtures."""
    return OptimizerConfig(restarts=2, max_iterations=100, seed=0)


@pytest.fixture
def channel_dir():
    return CHANNEL_DIR


@pytest.fixture
def identity():
    return identity_channel(2)


@pytest.fixture
def full_depolarizing():
    return depolarizing(1.0, 2)


@pytest.fixture
def pauli_z():
    return unitary_channel(PAULI_Z)


@pytest.fixture(params=[0.1, 0.3, 0.5])
def bit_flip_case(request):
    return request.param, bit_flip(request.param)
