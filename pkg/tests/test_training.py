"""Trainer: stage gating, determinism, resume equivalence, inert style path."""

import math

import pytest
import torch

from blendfield.checkpoint import load_checkpoint
from blendfield.config import Config
from blendfield.data import synthetic_natural, synthetic_styles
from blendfield.errors import ConfigError
from blendfield.training import (build_train_state, read_metric_series,
                                 restore_train_state, train)
from tests.conftest import TINY


@pytest.fixture(scope="module")
def datasets():
    return {
        "natural": synthetic_natural(16, 32, seed=0),
        "style": synthetic_styles(16, 32, seed=1),
    }


def small_cfg(**extra) -> Config:
    cfg = Config(dict(TINY))
    cfg.update({"train.stage1_steps": 4, "train.stage2_steps": 4,
                "train.contrastive_steps": 6, **extra})
    return cfg


def models_equal(state_a, state_b) -> bool:
    for name in state_a.modules:
        sd_a = state_a.modules[name].state_dict()
        sd_b = state_b.modules[name].state_dict()
        for key in sd_a:
            if not torch.equal(sd_a[key], sd_b[key]):
                return False
    return True


def test_stage2_requires_stage1_checkpoint(tmp_path, datasets):
    with pytest.raises(ConfigError):
        train(2, small_cfg(), datasets, tmp_path)


def test_stage2_requires_style_data(tmp_path, datasets):
    cfg = small_cfg()
    paths = train(1, cfg, {"natural": datasets["natural"]}, tmp_path / "s1")
    with pytest.raises(ConfigError):
        train(2, cfg, {"natural": datasets["natural"]}, tmp_path / "s2",
              resume_from=paths[-1])


def test_losses_logged_and_finite(tmp_path, datasets):
    cfg = small_cfg()
    out = tmp_path / "s1"
    train(1, cfg, datasets, out)
    for name in ("d_loss", "g_loss"):
        series = read_metric_series(out / "metrics_stage1.jsonl", name)
        assert len(series) == 4
        assert all(math.isfinite(v) for _, v in series)


def test_stage1_then_stage2_runs_all_branches(tmp_path, datasets):
    cfg = small_cfg()
    s1 = train(1, cfg, datasets, tmp_path / "s1")
    s2 = train(2, cfg, datasets, tmp_path / "s2", resume_from=s1[-1])
    contrastive = read_metric_series(tmp_path / "s2" / "metrics_stage2.jsonl",
                                     "contrastive")
    assert len(contrastive) == 6
    gan = read_metric_series(tmp_path / "s2" / "metrics_stage2.jsonl", "d_loss")
    assert len(gan) == 4
    ckpt = load_checkpoint(s2[-1])
    assert ckpt.stage == 2
    assert ckpt.step == 10


def test_stage2_step0_renders_identical_to_stage1_model(tmp_path, datasets):
    # with the split index at n the style path is inert, so loading a stage-1
    # checkpoint into the stage-2 trainer must not move natural renders at all
    cfg = small_cfg()
    paths = train(1, cfg, datasets, tmp_path / "s1")
    ckpt = load_checkpoint(paths[-1])

    state_a = build_train_state(cfg)
    restore_train_state(state_a, ckpt, full=False)
    state_b = build_train_state(cfg)
    restore_train_state(state_b, ckpt, full=False)

    z = torch.randn(1, 256, generator=torch.Generator().manual_seed(5))
    z_style = torch.randn(1, 512, generator=torch.Generator().manual_seed(6))
    pitch = torch.tensor([math.pi / 2])
    yaw = torch.tensor([math.pi / 2])
    img_stage1 = state_a.generator.synthesize(
        z, None, 11, pitch, yaw, resolution=32, n_samples=4,
        generator=torch.Generator().manual_seed(7))
    img_stage2 = state_b.generator.synthesize(
        z, z_style, 11, pitch, yaw, resolution=32, n_samples=4,
        generator=torch.Generator().manual_seed(7))
    assert torch.equal(img_stage1, img_stage2)


def test_resume_equivalence(tmp_path, datasets):
    # train 4 steps straight vs 2 steps, checkpoint, resume to 4
    cfg = small_cfg(**{"train.checkpoint_every": 2})
    full_state = build_train_state(cfg)
    train(1, cfg, datasets, tmp_path / "full", state=full_state)

    cfg_b = small_cfg(**{"train.checkpoint_every": 2, "train.stage1_steps": 2})
    half_state = build_train_state(cfg_b)
    half_paths = train(1, cfg_b, datasets, tmp_path / "half", state=half_state)

    cfg_c = small_cfg(**{"train.checkpoint_every": 2})
    resumed_state = build_train_state(cfg_c)
    train(1, cfg_c, datasets, tmp_path / "resumed", state=resumed_state,
          resume_from=half_paths[-1])

    assert models_equal(full_state, resumed_state)


def test_all_parameters_finite_after_training(tmp_path, datasets):
    cfg = small_cfg()
    state = build_train_state(cfg)
    train(1, cfg, datasets, tmp_path / "s1", state=state)
    for p in state.all_parameters():
        assert torch.isfinite(p).all()


def test_generator_gradient_reaches_all_groups_in_stage2(tmp_path, datasets):
    # one stage-2 style step populates gradients in every generator group
    from blendfield.training import gan_step, MetricLog

    cfg = small_cfg()
    s1 = train(1, cfg, datasets, tmp_path / "s1")
    state = build_train_state(cfg)
    restore_train_state(state, load_checkpoint(s1[-1]), full=False)
    state.stage = 2

    log = MetricLog(tmp_path / "probe.jsonl")
    groups = {
        "identity_mapping": state.generator.identity_mapping,
        "style_mapping": state.generator.style_mapping,
        "blender_raw": None,
        "field": state.generator.field,
        "renderer": state.generator.renderer,
    }
    captured = {}

    original_step = state.opt_g.step

    def capture_then_step(*args, **kwargs):
        captured["blender_raw"] = state.generator.blender.raw_weights.grad is not None \
            and state.generator.blender.raw_weights.grad.abs().sum() > 0
        for name, module in groups.items():
            if module is None:
                continue
            captured[name] = any(p.grad is not None and p.grad.abs().sum() > 0
                                 for p in module.parameters())
        return original_step(*args, **kwargs)

    state.opt_g.step = capture_then_step
    gan_step(state, datasets["natural"], datasets["style"], log)
    for name, reached in captured.items():
        assert reached, f"no generator gradient in {name}"
