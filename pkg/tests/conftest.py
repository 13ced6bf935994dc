import numpy as np
import pytest

from nftnet.dataset import generate


@pytest.fixture(scope="session")
def small_dataset():
    """Twelve generated bursts shared across test modules."""
    return generate(12, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
