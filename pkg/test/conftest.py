import numpy as np
import pytest

import src.model_construction as mc
from src.data_management.synthetic_scenes import SceneConfig

from helpers import run_cli, write_config


@pytest.fixture
def small_scene():
    return SceneConfig(height=16, width=16, frames=2, object_size_min=3, object_size_max=5, ego_velocity_min=-1.0,
                       ego_velocity_max=1.0, mover_speed_max=1.5)


@pytest.fixture
def tiny_config():
    return mc.ModelConfig(frames=2, height=16, width=16, channels=4, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_config(tmp_path):
    return write_config(tmp_path / 'toy.txt')


@pytest.fixture
def toy_dataset(tmp_path, toy_config):
    """
    Four generated 16 x 16 sequences (two for testing) with event_gt_dilated supervision maps.
    """
    root = tmp_path / 'data'
    assert run_cli('gen', '--config', toy_config, '--out', root, '--count', 4) == 0
    assert run_cli('build-sup', '--data', root, '--source', 'event_gt_dilated', '--config', toy_config) == 0
    return str(root)


@pytest.fixture
def trained_run(tmp_path, toy_config, toy_dataset):
    out = tmp_path / 'run'
    assert run_cli('train', '--data', toy_dataset, '--config', toy_config, '--out', out, '--quiet') == 0
    return str(out)
