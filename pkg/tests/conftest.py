"""
Shared fixtures: small synthetic partitions and a trained surrogate.
"""
import numpy as np
import pytest

from src.data.ingest import binarize_labels, sanitize
from src.data.normalize import fit_normalizer, normalize
from src.data.split import SplitSpec, split_indices
from src.data.synthetic import make_synthetic
from src.data.tables import Dataset
from src.models.config import ForestParams, MlpParams, TrainConfig
from src.models.mlp import fit_mlp


def build_partitions(n=600, d=8, seed=3, separation=2.5, label_noise=0.02):
    """Synthetic raw table pushed through sanitize, binarize, split and normalize."""
    raw = make_synthetic(n=n, d=d, separation=separation, label_noise=label_noise, seed=seed)
    labeled = binarize_labels(sanitize(raw))
    train_idx, test_idx = split_indices(labeled.labels, SplitSpec(train_fraction=0.6, seed=seed))
    schema = fit_normalizer(labeled.take(train_idx))
    train = normalize(labeled.take(train_idx), schema, row_ids=train_idx)
    test = normalize(labeled.take(test_idx), schema, row_ids=test_idx)
    return train, test, schema


def random_dataset(rng: np.random.Generator, n: int, d: int) -> Dataset:
    """Uniform features with both classes present."""
    X = rng.random((n, d))
    y = rng.integers(0, 2, size=n)
    y[0], y[1] = 0, 1
    return Dataset(X, y)


@pytest.fixture(scope="session")
def partitions():
    return build_partitions()


@pytest.fixture(scope="session")
def train_ds(partitions):
    return partitions[0]


@pytest.fixture(scope="session")
def test_ds(partitions):
    return partitions[1]


@pytest.fixture(scope="session")
def schema(partitions):
    return partitions[2]


@pytest.fixture(scope="session")
def fast_config():
    """Hyperparameters small enough for unit tests."""
    return TrainConfig(
        forest=ForestParams(n_trees=15),
        mlp=MlpParams(hidden=24, epochs=40, learning_rate=0.1, batch_size=32),
        seed=11,
    )


@pytest.fixture(scope="session")
def surrogate(train_ds, fast_config):
    return fit_mlp(train_ds, fast_config)
