"""Composed generator: feature grid rendering, SBM render contracts."""

import math

import pytest
import torch

from blendfield.config import Config
from blendfield.generator import StyleFieldGenerator, build_generator


@pytest.fixture
def tiny_gen(tiny_cfg):
    torch.manual_seed(0)
    return build_generator(tiny_cfg)


def frontal(batch=1):
    return (torch.full((batch,), math.pi / 2), torch.full((batch,), math.pi / 2))


def test_feature_grid_shape(tiny_gen):
    z = torch.randn(2, 256)
    fused = tiny_gen.fuse_latents(z, None, tiny_gen.n_sites)
    pitch, yaw = frontal(2)
    grid = tiny_gen.feature_grid(fused, pitch, yaw, grid_size=8, n_samples=4,
                                 generator=torch.Generator().manual_seed(0))
    assert grid.shape == (2, 16, 8, 8)


def test_default_configuration_grid_is_32():
    cfg = Config()
    assert cfg["model.grid_size"] == 32
    assert cfg["model.feature_channels"] == 64
    assert cfg["model.image_size"] == 128


def test_render_deterministic_per_seed(tiny_gen):
    z = torch.randn(1, 256)
    pitch, yaw = frontal()
    a = tiny_gen.synthesize(z, None, 11, pitch, yaw, resolution=32, n_samples=4,
                            generator=torch.Generator().manual_seed(7))
    b = tiny_gen.synthesize(z, None, 11, pitch, yaw, resolution=32, n_samples=4,
                            generator=torch.Generator().manual_seed(7))
    assert torch.equal(a, b)


def test_distinct_yaws_produce_distinct_grids(tiny_gen):
    z = torch.randn(1, 256)
    fused = tiny_gen.fuse_latents(z, None, tiny_gen.n_sites)
    pitch = torch.tensor([math.pi / 2])
    g1 = tiny_gen.feature_grid(fused, pitch, torch.tensor([math.pi / 2 - 0.4]),
                               8, 4, torch.Generator().manual_seed(0))
    g2 = tiny_gen.feature_grid(fused, pitch, torch.tensor([math.pi / 2 + 0.4]),
                               8, 4, torch.Generator().manual_seed(0))
    assert (g1 - g2).norm() > 0


def test_split_n_render_bit_identical_to_disabled_style_path(tiny_gen):
    z = torch.randn(1, 256)
    z_style = torch.randn(1, 512)
    pitch, yaw = frontal()
    with_style_arg = tiny_gen.synthesize(z, z_style, tiny_gen.n_sites, pitch, yaw,
                                         resolution=32, n_samples=4,
                                         generator=torch.Generator().manual_seed(3))
    disabled = tiny_gen.synthesize(z, None, tiny_gen.n_sites, pitch, yaw,
                                   resolution=32, n_samples=4,
                                   generator=torch.Generator().manual_seed(3))
    assert torch.equal(with_style_arg, disabled)


def test_split_zero_render_differs_for_nonzero_style(tiny_gen):
    z = torch.randn(1, 256)
    z_style = torch.randn(1, 512)
    pitch, yaw = frontal()
    stylized = tiny_gen.synthesize(z, z_style, 0, pitch, yaw, resolution=32,
                                   n_samples=4, generator=torch.Generator().manual_seed(3))
    natural = tiny_gen.synthesize(z, None, tiny_gen.n_sites, pitch, yaw,
                                  resolution=32, n_samples=4,
                                  generator=torch.Generator().manual_seed(3))
    assert (stylized - natural).norm() > 0


def test_direct_path_resolution_free(tiny_gen):
    z = torch.randn(1, 256)
    pitch, yaw = frontal()
    img = tiny_gen.synthesize(z, None, 11, pitch, yaw, resolution=20, n_samples=4,
                              generator=torch.Generator().manual_seed(0),
                              use_neural_renderer=False)
    assert img.shape == (1, 3, 20, 20)


def test_neural_path_requires_multiple_of_four(tiny_gen):
    z = torch.randn(1, 256)
    pitch, yaw = frontal()
    with pytest.raises(ValueError):
        tiny_gen.synthesize(z, None, 11, pitch, yaw, resolution=30, n_samples=4)


def test_generator_gradients_reach_every_parameter_group(tiny_gen):
    # stage-2 style configuration: split 0, style code attached
    z = torch.randn(2, 256)
    z_style = torch.randn(2, 512)
    pitch, yaw = frontal(2)
    img = tiny_gen.synthesize(z, z_style, 0, pitch, yaw, resolution=32,
                              n_samples=4, generator=torch.Generator().manual_seed(1))
    img.pow(2).mean().backward()
    groups = {
        "identity_mapping": tiny_gen.identity_mapping,
        "style_mapping": tiny_gen.style_mapping,
        "blender": tiny_gen.blender,
        "field": tiny_gen.field,
        "renderer": tiny_gen.renderer,
    }
    for name, module in groups.items():
        got = any(p.grad is not None and p.grad.abs().sum() > 0
                  for p in module.parameters())
        assert got, f"no gradient reached {name}"


def test_renderer_site_mismatch_rejected():
    with pytest.raises(ValueError):
        StyleFieldGenerator(n_sites=11, backbone_sites=8, renderer_widths=(16, 8))


def test_map_to_wplus_dispatch(tiny_gen):
    z = torch.randn(2, 256)
    z_s = torch.randn(2, 512)
    assert tiny_gen.map_to_wplus(z, "identity").shape == (2, 11, 256)
    assert tiny_gen.map_to_wplus(z_s, "style").shape == (2, 11, 256)
    with pytest.raises(ValueError):
        tiny_gen.map_to_wplus(z, "other")


def test_generator_mapping_networks_do_not_share_parameters(tiny_gen):
    ids_identity = {id(p) for p in tiny_gen.identity_mapping.parameters()}
    ids_style = {id(p) for p in tiny_gen.style_mapping.parameters()}
    assert ids_identity.isdisjoint(ids_style)


def test_render_feature_grid_default_scale_and_determinism():
    # default configuration produces the documented [M_f, 32, 32] grid
    from blendfield.camera import CameraPose

    torch.manual_seed(0)
    model = build_generator(Config())
    z = torch.randn(1, 256)
    fused = model.fuse_latents(z, None, model.n_sites)
    pose = CameraPose(math.pi / 2, math.pi / 2)
    a = model.render_feature_grid(pose, fused, n_samples=8, seed=4)
    b = model.render_feature_grid(pose, fused, n_samples=8, seed=4)
    assert a.shape == (64, 32, 32)
    assert torch.equal(a, b)
