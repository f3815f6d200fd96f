import os

import numpy as np
import pytest

from dlsvm.utils import RunConfig

MNIST_DIR = os.getenv("MNIST_DIR")
MNIST_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def mnist_path(name: str) -> str | None:
    for candidate in (name, name + ".gz"):
        path = os.path.join(MNIST_DIR or "", candidate)
        if os.path.exists(path):
            return path
    return None


needs_mnist = pytest.mark.skipif(
    not MNIST_DIR or not all(mnist_path(n) for n in MNIST_FILES),
    reason="set MNIST_DIR to a directory with the four MNIST IDX files",
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def blobs_config(tmp_path):
    """Small separable problem that trains in well under a second per epoch."""

    def make(**overrides) -> RunConfig:
        values = dict(
            dataset="blobs",
            blobs_n=120,
            blobs_test_n=60,
            blobs_k=3,
            blobs_d=4,
            blobs_separation=20.0,
            standardize=True,
            hidden=[8],
            C=0.05,
            init_std=0.1,
            lr_start=0.05,
            lr_end=0.0,
            epochs=5,
            batch_size=20,
            out_dir=str(tmp_path / "run"),
        )
        values.update(overrides)
        config = RunConfig(**values)
        config.explicit = set(values)
        return config.validate()

    return make
