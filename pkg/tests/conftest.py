from pathlib import Path

import pytest
import torch

from blendfield.config import Config

TINY = {
    "model.hidden": 32,
    "model.feature_channels": 16,
    "renderer.widths": [16, 8, 8],
    "model.image_size": 32,
    "model.grid_size": 8,
    "model.n_samples": 8,
    "model.mapping_hidden": 64,
    "disc.base_width": 16,
    "disc.max_width": 64,
    "encoder.extractor_width": 8,
    "encoder.projection_hidden": 64,
    "train.batch_size": 4,
    "train.contrastive_batch": 4,
    "train.contrastive_steps": 40,
    "train.stage1_steps": 6,
    "train.stage2_steps": 6,
    "train.checkpoint_every": 1000,
    "train.log_every": 1,
    "service.default_resolution": 32,
}


@pytest.fixture
def tiny_cfg() -> Config:
    return Config(dict(TINY))


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(0)


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> Path:
    """An untrained tiny-model checkpoint shared by service/CLI tests."""
    from blendfield.training import build_train_state, save_train_checkpoint

    cfg = Config(dict(TINY))
    state = build_train_state(cfg)
    path = tmp_path_factory.mktemp("ckpt") / "tiny.ckpt"
    save_train_checkpoint(state, path)
    return path
