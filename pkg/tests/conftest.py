import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pentimento.gradcheck import make_random_network
from pentimento.network import FeatureExtractor
from pentimento.weights import save_weights


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def tiny_net():
    """3-conv random-weight network on 3 input channels."""
    spec, store = make_random_network(seed=7)
    return FeatureExtractor(spec, store)


@pytest.fixture
def tiny_weight_file(tmp_path):
    """A small random .nstw on disk, plus its store."""
    _, store = make_random_network(seed=7)
    path = tmp_path / "tiny.nstw"
    save_weights(store, path)
    return path, store


def make_image(rng, h=8, w=8, channels=3):
    """Random [0,1] network input of shape (1, channels, h, w)."""
    return rng.random((1, channels, h, w)).astype(np.float32)
