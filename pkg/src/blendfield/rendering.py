"""Neural super-resolution of the volume-rendered feature grid.

Three blocks of style-modulated 1x1 convolutions turn the low-resolution
feature grid into the final image: one refinement block at the input
resolution followed by two blocks that each upsample by 2 (bilinear, fixed
kernel), for a total of 4x. Every block contributes an RGB estimate through
a to_rgb skip that is upsampled and accumulated, and a final squash keeps the
image inside (-1, 1). 1x1 convolutions mix no spatial context, so the
receptive field of an output pixel is exactly the accumulated upsample
footprint of its source grid site.
"""

import math
from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError


def modulated_conv1x1(x: torch.Tensor, styles: torch.Tensor, weight: torch.Tensor,
                      bias: torch.Tensor | None = None, demodulate: bool = True,
                      eps: float = 1e-8) -> torch.Tensor:
    """Style-modulated, demodulated 1x1 convolution.

    x [B, C_in, H, W]; styles [B, C_in] scale the input channels of the
    shared weight [C_out, C_in]; demodulation rescales each output channel of
    the per-sample weight to unit norm before the convolution is applied.
    """
    if styles.shape[-1] != weight.shape[1]:
        raise ConfigError(
            f"style dim {styles.shape[-1]} does not match conv input channels {weight.shape[1]}")
    w = weight[None] * styles[:, None, :]                       # [B, C_out, C_in]
    if demodulate:
        norm = torch.rsqrt(w.pow(2).sum(dim=2, keepdim=True) + eps)
        w = w * norm
    y = torch.einsum("boi,bihw->bohw", w, x)
    if bias is not None:
        y = y + bias.reshape(1, -1, 1, 1)
    return y


def upsample2x(x: torch.Tensor) -> torch.Tensor:
    """Fixed bilinear 2x upsampling (align_corners=False)."""
    return F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)


def upsample_footprint(site: int, n_upsamples: int, out_size: int) -> tuple[int, int]:
    """Closed interval of output indices influenced by one input index.

    Under one bilinear 2x stage (align_corners=False), input index u feeds
    output indices [2u - 1, 2u + 2]; stages compose.
    """
    lo = hi = site
    for _ in range(n_upsamples):
        lo = 2 * lo - 1
        hi = 2 * hi + 2
    return max(lo, 0), min(hi, out_size - 1)


class ModConvLayer(nn.Module):
    """Affine style projection + modulated 1x1 conv + bias and activation."""

    def __init__(self, in_channels: int, out_channels: int, w_dim: int = 256,
                 demodulate: bool = True, leak: float = 0.2):
        super().__init__()
        self.affine = nn.Linear(w_dim, in_channels)
        nn.init.ones_(self.affine.bias)
        nn.init.normal_(self.affine.weight, std=1.0 / math.sqrt(w_dim))
        self.weight = nn.Parameter(torch.randn(out_channels, in_channels) / math.sqrt(in_channels))
        self.bias = nn.Parameter(torch.zeros(out_channels))
        self.demodulate = demodulate
        self.leak = leak

    def forward(self, x: torch.Tensor, w_row: torch.Tensor) -> torch.Tensor:
        styles = self.affine(w_row)
        y = modulated_conv1x1(x, styles, self.weight, self.bias, self.demodulate)
        return F.leaky_relu(y, self.leak)


class RenderBlock(nn.Module):
    """Optional 2x upsample, two modulated 1x1 convs, and an RGB skip tap."""

    def __init__(self, in_channels: int, out_channels: int, w_dim: int,
                 upsample: bool):
        super().__init__()
        self.upsample = upsample
        self.conv0 = ModConvLayer(in_channels, out_channels, w_dim)
        self.conv1 = ModConvLayer(out_channels, out_channels, w_dim)
        self.to_rgb = nn.Conv2d(out_channels, 3, kernel_size=1)

    def forward(self, x: torch.Tensor, w_row: torch.Tensor,
                rgb: torch.Tensor | None) -> tuple[torch.Tensor, torch.Tensor]:
        if self.upsample:
            x = upsample2x(x)
            if rgb is not None:
                rgb = upsample2x(rgb)
        x = self.conv0(x, w_row)
        x = self.conv1(x, w_row)
        skip = self.to_rgb(x)
        rgb = skip if rgb is None else rgb + skip
        return x, rgb


class NeuralRenderer(nn.Module):
    """Feature grid [B, M_f, S, S] + renderer latents [B, n_nr, w] -> image.

    Block widths follow the channel plan (default M_f -> 64 -> 32 -> 32 with
    a 3-channel to_rgb per block); the output image is 4S x 4S in (-1, 1).
    """

    def __init__(self, feature_channels: int = 64, widths: Sequence[int] = (64, 32, 32),
                 w_dim: int = 256):
        super().__init__()
        if len(widths) != 3:
            raise ConfigError("the renderer uses exactly 3 blocks")
        self.n_sites = len(widths)
        self.blocks = nn.ModuleList()
        in_ch = feature_channels
        for i, out_ch in enumerate(widths):
            self.blocks.append(RenderBlock(in_ch, out_ch, w_dim, upsample=(i > 0)))
            in_ch = out_ch
        self.n_upsamples = 2

    def forward(self, grid: torch.Tensor, w_renderer: torch.Tensor) -> torch.Tensor:
        if w_renderer.dim() == 2:
            w_renderer = w_renderer[None]
        if w_renderer.shape[1] != self.n_sites:
            raise ConfigError(
                f"renderer expects {self.n_sites} latent rows, got {w_renderer.shape[1]}")
        if grid.dim() == 3:
            grid = grid[None]
        x, rgb = grid, None
        for i, block in enumerate(self.blocks):
            x, rgb = block(x, w_renderer[:, i], rgb)
        return squash_rgb(rgb)

    def output_size(self, grid_size: int) -> int:
        return grid_size * (2 ** self.n_upsamples)


def squash_rgb(x: torch.Tensor) -> torch.Tensor:
    """Monotone clamp of raw RGB onto (-1, 1)."""
    return torch.tanh(x)


def to_uint8(image: torch.Tensor) -> torch.Tensor:
    """Map [-1, 1] float image to uint8 via round((v + 1) * 127.5), clamped."""
    scaled = torch.round((image + 1.0) * 127.5).clamp(0, 255)
    return scaled.to(torch.uint8)


def image_to_png_bytes(image: torch.Tensor) -> bytes:
    """Encode a [3, H, W] image in [-1, 1] as PNG bytes."""
    import io

    from PIL import Image

    array = to_uint8(image).permute(1, 2, 0).cpu().numpy()
    buffer = io.BytesIO()
    Image.fromarray(array, mode="RGB").save(buffer, format="PNG")
    return buffer.getvalue()


def png_bytes_to_image(data: bytes) -> torch.Tensor:
    """Decode PNG bytes to a [3, H, W] float image in [-1, 1]."""
    import io

    import numpy as np
    from PIL import Image

    with Image.open(io.BytesIO(data)) as img:
        array = np.asarray(img.convert("RGB"), dtype=np.float32)
    return torch.from_numpy(array).permute(2, 0, 1) / 127.5 - 1.0
