"""Triple-branch discriminator family.

All three branches share one trunk design: a conv stem, residual
downsampling stages until the map reaches a small spatial floor, and global
sum pooling. The natural-face and style-face branches add a pose-prediction
head; the conditional branch instead adds an embedder head whose dot product
with the pooled features augments the logit (projection conditioning).
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError


@dataclass
class DiscOutput:
    logit: torch.Tensor                     # [B]
    predicted_pose: torch.Tensor | None     # [B, 2] (pitch, yaw) or None
    gsp_features: torch.Tensor              # [B, d_g]


class ResDownBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv0 = nn.Conv2d(in_channels, in_channels, 3, padding=1)
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.skip = nn.Conv2d(in_channels, out_channels, 1, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.conv0(F.leaky_relu(x, 0.2))
        y = self.conv1(F.leaky_relu(y, 0.2))
        y = F.avg_pool2d(y, 2)
        s = self.skip(F.avg_pool2d(x, 2))
        return (y + s) / math.sqrt(2.0)


class Discriminator(nn.Module):
    """Residual trunk + global sum pooling, with optional pose/embedder heads."""

    def __init__(self, image_size: int = 128, base_width: int = 64,
                 max_width: int = 512, min_spatial: int = 8,
                 pose_head: bool = True, condition_dim: int | None = None):
        super().__init__()
        if image_size < min_spatial * 2:
            raise ConfigError("image size too small for the trunk")
        self.image_size = image_size
        self.stem = nn.Conv2d(3, base_width, 3, padding=1)
        stages = []
        width = base_width
        size = image_size
        while size > min_spatial:
            out = min(width * 2, max_width)
            stages.append(ResDownBlock(width, out))
            width = out
            size //= 2
        self.stages = nn.Sequential(*stages)
        self.feature_dim = width
        self.logit_head = nn.Linear(width, 1)
        self.pose_head = nn.Linear(width, 2) if pose_head else None
        self.embedder = None
        if condition_dim is not None:
            self.embedder = nn.Linear(condition_dim, width)
            nn.init.zeros_(self.embedder.weight)
            nn.init.zeros_(self.embedder.bias)

    def trunk(self, img: torch.Tensor) -> torch.Tensor:
        if img.shape[-1] != self.image_size or img.shape[-2] != self.image_size:
            raise ConfigError(
                f"discriminator expects {self.image_size}x{self.image_size} input, "
                f"got {tuple(img.shape[-2:])}")
        x = self.stages(self.stem(img))
        x = F.leaky_relu(x, 0.2)
        return x.sum(dim=(2, 3))  # global sum pooling -> [B, d_g]

    def forward(self, img: torch.Tensor) -> DiscOutput:
        gsp = self.trunk(img)
        logit = self.logit_head(gsp).squeeze(-1)
        pose = self.pose_head(gsp) if self.pose_head is not None else None
        return DiscOutput(logit=logit, predicted_pose=pose, gsp_features=gsp)

    def conditioned_logit(self, img: torch.Tensor, condition: torch.Tensor) -> torch.Tensor:
        """Base logit plus <gsp, embed(condition)> (projection conditioning)."""
        if self.embedder is None:
            raise ConfigError("this discriminator has no embedder head")
        if condition.shape[-1] != self.embedder.in_features:
            raise ConfigError(
                f"condition dim {condition.shape[-1]} does not match embedder "
                f"input {self.embedder.in_features}")
        gsp = self.trunk(img)
        logit = self.logit_head(gsp).squeeze(-1)
        return logit + (gsp * self.embedder(condition)).sum(dim=-1)


def build_triple(image_size: int, base_width: int = 64, max_width: int = 512,
                 min_spatial: int = 8, condition_dim: int = 512
                 ) -> tuple[Discriminator, Discriminator, Discriminator]:
    """D_real, D_style (both with pose heads) and the conditional D."""
    d_real = Discriminator(image_size, base_width, max_width, min_spatial, pose_head=True)
    d_style = Discriminator(image_size, base_width, max_width, min_spatial, pose_head=True)
    d_cond = Discriminator(image_size, base_width, max_width, min_spatial,
                           pose_head=False, condition_dim=condition_dim)
    return d_real, d_style, d_cond
