"""Latent codes, dual mapping networks, and the style blending module.

Identity and style codes are mapped to per-layer latent stacks [n, w_dim]
by two mapping networks with unshared parameters. The blender mixes the two
stacks row-wise with learnable weights squashed to (0, 1); a split index i
zeroes style influence on every row below i, so i = n reproduces the pure
identity path and i = 0 applies maximal style influence. Rows feeding the
neural renderer are first refined by per-site projection units, one set per
input path.
"""

from typing import NamedTuple

import torch
import torch.nn as nn

from .errors import ConfigError


class FusedLatents(NamedTuple):
    backbone: torch.Tensor  # [B, k, w_dim]
    renderer: torch.Tensor  # [B, n_nr, w_dim]


def apply_split_mask(raw: torch.Tensor, split_index: int) -> torch.Tensor:
    """Effective blend weights: sigmoid(raw) with rows below split_index zeroed."""
    n = raw.shape[-1]
    if not 0 <= split_index <= n:
        raise ValueError(f"split_index must be in [0, {n}], got {split_index}")
    effective = torch.sigmoid(raw)
    if split_index > 0:
        mask = torch.ones_like(effective)
        mask[..., :split_index] = 0.0
        effective = effective * mask
    return effective


class BlendWeights:
    """Unconstrained raw weights plus the split-index view onto them."""

    def __init__(self, raw: torch.Tensor):
        self.raw = raw

    @property
    def n(self) -> int:
        return self.raw.shape[-1]

    def effective(self, split_index: int) -> torch.Tensor:
        return apply_split_mask(self.raw, split_index)


class MappingNetwork(nn.Module):
    """Affine stack mapping a latent code to an [n, w_dim] per-layer stack."""

    def __init__(self, in_dim: int, w_dim: int = 256, n_sites: int = 11,
                 hidden: int = 256, n_layers: int = 4, leak: float = 0.2):
        super().__init__()
        self.in_dim = in_dim
        self.w_dim = w_dim
        self.n_sites = n_sites
        layers: list[nn.Module] = []
        dim = in_dim
        for _ in range(n_layers - 1):
            layers += [nn.Linear(dim, hidden), nn.LeakyReLU(leak)]
            dim = hidden
        layers.append(nn.Linear(dim, n_sites * w_dim))
        self.net = nn.Sequential(*layers)

    def forward(self, code: torch.Tensor) -> torch.Tensor:
        if code.shape[-1] != self.in_dim:
            raise ConfigError(
                f"mapping network expects dim {self.in_dim}, got {code.shape[-1]}")
        squeeze = code.dim() == 1
        if squeeze:
            code = code[None]
        stack = self.net(code).reshape(code.shape[0], self.n_sites, self.w_dim)
        return stack[0] if squeeze else stack


class StyleBlender(nn.Module):
    """Learnable row-wise blending of identity and style latent stacks.

    Backbone rows (below k) blend the raw stacks; renderer rows blend the
    projection-unit outputs. Row l of the output is

        e_l * style_row_l + (1 - e_l) * identity_row_l

    with e = weights.effective(split_index). A fully masked blend
    (split_index == n, or no style stack given) reduces exactly to the
    identity stack, renderer rows included.
    """

    def __init__(self, n_sites: int = 11, backbone_sites: int = 8,
                 w_dim: int = 256, raw_init: float = 0.0):
        super().__init__()
        if backbone_sites > n_sites:
            raise ConfigError("backbone_sites cannot exceed n_sites")
        self.n_sites = n_sites
        self.backbone_sites = backbone_sites
        self.renderer_sites = n_sites - backbone_sites
        self.raw_weights = nn.Parameter(torch.full((n_sites,), float(raw_init)))
        self.identity_projection = nn.ModuleList(
            nn.Linear(w_dim, w_dim) for _ in range(self.renderer_sites))
        self.style_projection = nn.ModuleList(
            nn.Linear(w_dim, w_dim) for _ in range(self.renderer_sites))

    def weights(self) -> BlendWeights:
        return BlendWeights(self.raw_weights)

    def project_renderer_rows(self, stack: torch.Tensor, path: str) -> torch.Tensor:
        """Apply per-site projection units to the renderer rows [B, n_nr, w]."""
        units = self.identity_projection if path == "identity" else self.style_projection
        rows = [unit(stack[:, i]) for i, unit in enumerate(units)]
        return torch.stack(rows, dim=1)

    def forward(self, w_identity: torch.Tensor, w_style: torch.Tensor | None,
                split_index: int, weights: BlendWeights | None = None) -> FusedLatents:
        squeeze = w_identity.dim() == 2
        if squeeze:
            w_identity = w_identity[None]
            w_style = None if w_style is None else w_style[None]
        k = self.backbone_sites
        n = self.n_sites
        if w_identity.shape[-2] != n:
            raise ConfigError(
                f"expected latent stacks with {n} rows, got {w_identity.shape[-2]}")
        if not 0 <= split_index <= n:
            raise ValueError(f"split_index must be in [0, {n}], got {split_index}")
        if weights is None:
            weights = self.weights()

        identity_nr = self.project_renderer_rows(w_identity[:, k:], "identity")
        if w_style is None or split_index == n:
            fused = FusedLatents(w_identity[:, :k], identity_nr)
        else:
            if w_style.shape != w_identity.shape:
                raise ConfigError("identity and style stacks must share a shape")
            eff = weights.effective(split_index)              # [n]
            e_bb = eff[:k].reshape(1, k, 1)
            e_nr = eff[k:].reshape(1, n - k, 1)
            style_nr = self.project_renderer_rows(w_style[:, k:], "style")
            backbone = e_bb * w_style[:, :k] + (1.0 - e_bb) * w_identity[:, :k]
            renderer = e_nr * style_nr + (1.0 - e_nr) * identity_nr
            fused = FusedLatents(backbone, renderer)
        if squeeze:
            return FusedLatents(fused.backbone[0], fused.renderer[0])
        return fused
