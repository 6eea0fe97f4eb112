"""Shared fixtures: cached dataset loading and helpers."""
import os
import warnings

import numpy as np
import pytest

from spikebp.datasets import DatasetError, default_cache_dir, load_dataset


@pytest.fixture(scope="session")
def digits_sets():
    """(train, test) split of the 8x8 digits set, generated/cached on first use."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return load_dataset("digits")
    except DatasetError as exc:  # pragma: no cover - environment without sklearn
        pytest.skip(f"digits dataset unavailable: {exc}")


def mnist_cached() -> bool:
    """True when all four MNIST IDX files are already in the local cache."""
    root = os.path.join(default_cache_dir(), "mnist")
    names = [
        "train-images-idx3-ubyte.gz",
        "train-labels-idx1-ubyte.gz",
        "t10k-images-idx3-ubyte.gz",
        "t10k-labels-idx1-ubyte.gz",
    ]
    return all(os.path.exists(os.path.join(root, n)) for n in names)


@pytest.fixture(scope="session")
def mnist_sets():
    if not mnist_cached():
        pytest.skip(
            "MNIST IDX files not present in cache and this environment has no "
            "network access; run `spikebp fetch --dataset mnist` where downloads "
            "are possible and re-run"
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return load_dataset("mnist")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
