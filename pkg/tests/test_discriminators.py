"""Discriminator trunk, pose heads, and projection conditioning."""

import pytest
import torch

from blendfield.discriminators import Discriminator, build_triple
from blendfield.errors import ConfigError


@pytest.fixture
def disc():
    torch.manual_seed(0)
    return Discriminator(image_size=32, base_width=8, max_width=32, pose_head=True)


def test_batch_contract(disc):
    out = disc(torch.randn(5, 3, 32, 32))
    assert out.logit.shape == (5,)
    assert out.predicted_pose.shape == (5, 2)
    assert out.gsp_features.shape == (5, disc.feature_dim)


def test_deterministic_per_snapshot(disc):
    x = torch.randn(2, 3, 32, 32)
    assert torch.equal(disc(x).logit, disc(x).logit)


def test_gradients_reach_all_trunk_parameters(disc):
    x = torch.randn(3, 3, 32, 32)
    disc(x).logit.sum().backward()
    for name, p in disc.named_parameters():
        if name.startswith("pose_head"):
            continue  # pose head feeds a separate output
        assert p.grad is not None and p.grad.abs().sum() > 0, name


def test_wrong_resolution_rejected(disc):
    with pytest.raises(ConfigError):
        disc(torch.randn(1, 3, 64, 64))


@pytest.fixture
def cond_disc():
    torch.manual_seed(1)
    return Discriminator(image_size=32, base_width=8, max_width=32,
                         pose_head=False, condition_dim=24)


def test_zero_init_embedder_matches_base_logit(cond_disc):
    x = torch.randn(4, 3, 32, 32)
    codes = torch.randn(4, 24)
    assert torch.allclose(cond_disc.conditioned_logit(x, codes), cond_disc(x).logit)


def test_conditioning_linearity(cond_disc):
    with torch.no_grad():
        cond_disc.embedder.weight.normal_()
        cond_disc.embedder.bias.normal_()
    x = torch.randn(2, 3, 32, 32)
    c1 = torch.randn(2, 24)
    c2 = torch.randn(2, 24)
    gsp = cond_disc(x).gsp_features
    diff = cond_disc.conditioned_logit(x, c1) - cond_disc.conditioned_logit(x, c2)
    expected = (gsp * (cond_disc.embedder(c1) - cond_disc.embedder(c2))).sum(dim=-1)
    assert torch.allclose(diff, expected, atol=1e-5)


def test_conditioning_affine_collinearity(cond_disc):
    # output is affine in the embedded condition: midpoint gives the mean logit
    with torch.no_grad():
        cond_disc.embedder.weight.normal_()
    x = torch.randn(3, 3, 32, 32)
    c1 = torch.randn(3, 24)
    c2 = torch.randn(3, 24)
    mid = (c1 + c2) / 2
    lhs = cond_disc.conditioned_logit(x, mid)
    rhs = (cond_disc.conditioned_logit(x, c1) + cond_disc.conditioned_logit(x, c2)) / 2
    assert torch.allclose(lhs, rhs, atol=1e-5)


def test_condition_batch_contract(cond_disc):
    out = cond_disc.conditioned_logit(torch.randn(6, 3, 32, 32), torch.randn(6, 24))
    assert out.shape == (6,)


def test_condition_dim_mismatch(cond_disc):
    with pytest.raises(ConfigError):
        cond_disc.conditioned_logit(torch.randn(1, 3, 32, 32), torch.randn(1, 23))


def test_pose_head_presence():
    no_pose = Discriminator(image_size=32, base_width=8, pose_head=False)
    assert no_pose(torch.randn(1, 3, 32, 32)).predicted_pose is None
    with pytest.raises(ConfigError):
        no_pose.conditioned_logit(torch.randn(1, 3, 32, 32), torch.randn(1, 8))


def test_triple_shares_architecture_but_not_parameters():
    d_real, d_style, d_cond = build_triple(32, base_width=8, max_width=32,
                                           condition_dim=16)
    assert d_real.feature_dim == d_style.feature_dim == d_cond.feature_dim
    ids = [{id(p) for p in d.parameters()} for d in (d_real, d_style, d_cond)]
    assert ids[0].isdisjoint(ids[1])
    assert ids[0].isdisjoint(ids[2])
    assert ids[1].isdisjoint(ids[2])
    assert d_real.pose_head is not None and d_style.pose_head is not None
    assert d_cond.pose_head is None and d_cond.embedder is not None


def test_stage_count_follows_resolution():
    # 128 -> 8 is four halvings
    d = Discriminator(image_size=128, base_width=8, max_width=64)
    assert len(d.stages) == 4
    d32 = Discriminator(image_size=32, base_width=8, max_width=64)
    assert len(d32.stages) == 2
