"""
Shared fixtures: micro configurations and synthetic datasets.
"""
import pytest

from config import AppConfig
from dataset.prepare import prepare_dataset
from dataset.synthetic import make_synthetic_dataset
from pose.landmarks import LANDMARK_INDEX, NUM_LANDMARKS, LandmarkSet

MICRO_SIZE = (64, 32)


def make_micro_config(**train_overrides) -> AppConfig:
    """64x32 images, depth 6, a 4-channel base plan and short schedules."""
    config = AppConfig()
    config.model.image_size = MICRO_SIZE
    config.model.base_channels = 4
    config.data.crop_target = MICRO_SIZE
    config.train.batch_size = 2
    config.train.epochs = 1
    config.train.iterations_per_epoch = 3
    config.train.log_every = 1000
    config.metrics.splits = 1
    for key, value in train_overrides.items():
        setattr(config.train, key, value)
    return config


def landmarks_from_dict(points: dict, height: int = 64, width: int = 64) -> LandmarkSet:
    """Landmark set with only the named points present."""
    entries = [None] * NUM_LANDMARKS
    for name, point in points.items():
        entries[LANDMARK_INDEX[name]] = point
    return LandmarkSet.from_points(entries, height, width)


@pytest.fixture
def micro_config():
    return make_micro_config()


@pytest.fixture
def synthetic_root(tmp_path):
    info = make_synthetic_dataset(str(tmp_path / "raw"), num_identities=10,
                                  height=MICRO_SIZE[0], width=MICRO_SIZE[1], seed=3)
    return info.root


@pytest.fixture
def prepared(tmp_path, synthetic_root, micro_config):
    return prepare_dataset(synthetic_root, str(tmp_path / "prepared"), micro_config)
