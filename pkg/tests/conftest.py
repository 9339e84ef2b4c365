import numpy as np
import pytest

from degmon.dataset import probe_images


@pytest.fixture(scope="session")
def probe_set():
    return probe_images(count=16, size=64, seed=7)


@pytest.fixture()
def test_image(probe_set):
    return probe_set[0].copy()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
