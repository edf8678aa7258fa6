import numpy as np
import pytest

from labelreach import SynthConfig, generate_world
from labelreach import prep
from labelreach.prep import SplitKind


@pytest.fixture(scope="session")
def default_config():
    return SynthConfig()


@pytest.fixture(scope="session")
def default_world(default_config):
    return generate_world(default_config)


@pytest.fixture(scope="session")
def default_split(default_world):
    grid = prep.make_tile_grid(default_world.labels.width, default_world.labels.height, 64)
    return prep.assign_splits(grid, (0.9, 0.1), 1234)


@pytest.fixture(scope="session")
def train_ds(default_world, default_split):
    return prep.extract_pixels(
        default_world.embeddings, default_world.labels, default_split, SplitKind.TRAIN
    )


@pytest.fixture(scope="session")
def val_ds(default_world, default_split):
    return prep.extract_pixels(
        default_world.embeddings, default_world.labels, default_split, SplitKind.VAL
    )


@pytest.fixture(scope="session")
def noisy_config():
    return SynthConfig(noise_sigma=2.0)  # sigma = sep / 2


@pytest.fixture(scope="session")
def noisy_world(noisy_config):
    return generate_world(noisy_config)


@pytest.fixture(scope="session")
def noisy_split(noisy_world):
    grid = prep.make_tile_grid(noisy_world.labels.width, noisy_world.labels.height, 64)
    return prep.assign_splits(grid, (0.9, 0.1), 1234)


def accuracy(model, ds) -> float:
    pred = np.argmax(model.predict_proba(ds.features), axis=1)
    return float((pred == ds.targets).mean())
