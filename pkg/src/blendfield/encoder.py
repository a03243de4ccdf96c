"""Contrastive style encoder.

A frozen perceptual extractor produces multi-scale features; a trainable
compressor CNN reduces them to a 512-dim style code; a 2-layer projection
head maps codes to the representation vectors used only by the contrastive
objective. The desk-scale default extractor is a fixed random CNN so the
whole pipeline runs hermetically; any frozen feature module with the same
call contract can be plugged in instead.
"""

import struct
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import IntegrityError

STYLE_CODE_DIM = 512
CODE_FILE_MAGIC = b"SCOD"


class RandomFeatureExtractor(nn.Module):
    """Fixed random CNN standing in for a pretrained perceptual network.

    Parameters are drawn once from a seeded generator and never trained.
    Returns a list of feature maps at 1/2, 1/4, and 1/8 resolution.
    """

    def __init__(self, width: int = 32, seed: int = 7):
        super().__init__()
        generator = torch.Generator().manual_seed(seed)
        self.convs = nn.ModuleList()
        channels = [3, width, width * 2, width * 4]
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            conv = nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=generator)
                                  / (c_in * 9) ** 0.5)
                conv.bias.zero_()
            self.convs.append(conv)
        self.out_channels = channels[1:]
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, img: torch.Tensor) -> list[torch.Tensor]:
        if img.dim() == 3:
            img = img[None]
        feats = []
        x = img
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.2)
            feats.append(x)
        return feats


class StyleEncoder(nn.Module):
    """extractor (frozen) -> compressor -> 512-dim style code [-> projection head]."""

    def __init__(self, extractor: nn.Module | None = None, extractor_width: int = 32,
                 extractor_seed: int = 7, code_dim: int = STYLE_CODE_DIM,
                 projection_hidden: int = 256, representation_dim: int = 128):
        super().__init__()
        self.extractor = extractor if extractor is not None else RandomFeatureExtractor(
            width=extractor_width, seed=extractor_seed)
        self.code_dim = code_dim
        probe_channels = getattr(self.extractor, "out_channels", None)
        if probe_channels is None:
            with torch.no_grad():
                probe = self.extractor(torch.zeros(1, 3, 64, 64))
            probe_channels = [f.shape[1] for f in probe]
        total = sum(probe_channels)
        self.compress = nn.Sequential(
            nn.Conv2d(total, 256, kernel_size=3, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(256, 256, kernel_size=3, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.AdaptiveAvgPool2d(1),
        )
        self.to_code = nn.Linear(256, code_dim)
        self.projection = nn.Sequential(
            nn.Linear(code_dim, projection_hidden),
            nn.LeakyReLU(0.2),
            nn.Linear(projection_hidden, representation_dim),
        )

    def extract_features(self, img: torch.Tensor) -> list[torch.Tensor]:
        with torch.no_grad():
            return self.extractor(img)

    def _stack_features(self, feats: list[torch.Tensor]) -> torch.Tensor:
        size = feats[-1].shape[-2:]
        resized = [f if f.shape[-2:] == size else
                   F.adaptive_avg_pool2d(f, size) for f in feats]
        return torch.cat(resized, dim=1)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        """Encode images [B, 3, H, W] (or a single [3, H, W]) to style codes."""
        squeeze = img.dim() == 3
        if squeeze:
            img = img[None]
        feats = self.extract_features(img)
        x = self.compress(self._stack_features(feats)).flatten(1)
        code = self.to_code(x)
        return code[0] if squeeze else code

    def represent(self, img: torch.Tensor) -> torch.Tensor:
        """Style codes mapped through the projection head (training only)."""
        return self.projection(self(img))


def nt_xent_loss(reps: torch.Tensor, pairs: list[tuple[int, int]],
                 tau: float) -> torch.Tensor:
    """Contrastive loss over a 2N batch of representation vectors.

    For an ordered positive pair (i, j),

        l(i, j) = -log( exp(sim(u_i, u_j) / tau)
                        / sum_{k != i, k != j} exp(sim(u_i, u_k) / tau) )

    with cosine similarity. The denominator runs over the 2N - 2 remaining
    samples (it excludes both members of the pair), so the loss is not
    bounded below by zero. The batch loss averages l over all ordered pairs.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    total = reps.shape[0]
    if total < 4 or total % 2 != 0:
        raise ValueError("need an even batch of at least 4 representations")
    partner: dict[int, int] = {}
    for a, b in pairs:
        if a in partner or b in partner or a == b:
            raise ValueError("each sample must appear in exactly one pair")
        partner[a] = b
        partner[b] = a
    if len(partner) != total:
        raise ValueError("pairs must cover the whole batch")

    unit = F.normalize(reps, dim=-1)
    sims = unit @ unit.t() / tau                                  # [2N, 2N]
    losses = []
    for i in range(total):
        j = partner[i]
        mask = torch.ones(total, dtype=torch.bool, device=reps.device)
        mask[i] = False
        mask[j] = False
        denom = torch.logsumexp(sims[i][mask], dim=0)
        losses.append(denom - sims[i, j])
    return torch.stack(losses).mean()


def interleaved_pairs(n: int) -> list[tuple[int, int]]:
    """Positive-pair layout for batches arranged [x0, aug(x0), x1, aug(x1), ...]."""
    return [(2 * i, 2 * i + 1) for i in range(n)]


def affine_transform(img: torch.Tensor, angle: float = 0.0, translate: tuple[float, float] = (0.0, 0.0),
                     scale: float = 1.0, flip: bool = False) -> torch.Tensor:
    """Apply an explicit affine transform with reflection padding.

    angle in degrees, translate as a fraction of the image size. Identity
    parameters return the input unchanged.
    """
    squeeze = img.dim() == 3
    if squeeze:
        img = img[None]
    theta_rad = torch.deg2rad(torch.tensor(float(angle), dtype=img.dtype))
    cos, sin = torch.cos(theta_rad), torch.sin(theta_rad)
    sx = -1.0 if flip else 1.0
    # grid_sample maps output coords through theta; scale divides so that
    # scale > 1 zooms in
    theta = torch.tensor([
        [cos * sx / scale, -sin / scale, float(translate[0] * 2)],
        [sin * sx / scale, cos / scale, float(translate[1] * 2)],
    ], dtype=img.dtype)[None].expand(img.shape[0], 2, 3)
    grid = F.affine_grid(theta, list(img.shape), align_corners=False)
    out = F.grid_sample(img, grid, mode="bilinear", padding_mode="reflection",
                        align_corners=False)
    return out[0] if squeeze else out


def augment(img: torch.Tensor, seed: int) -> torch.Tensor:
    """Random affine augmentation, deterministic per seed.

    Rotation up to 15 degrees, translation up to 10%, scale in [0.9, 1.1],
    horizontal flip with probability 0.5.
    """
    generator = torch.Generator().manual_seed(seed)
    draws = torch.rand(4, generator=generator)
    angle = (draws[0].item() * 2 - 1) * 15.0
    tx = (draws[1].item() * 2 - 1) * 0.10
    ty = (draws[2].item() * 2 - 1) * 0.10
    scale = 0.9 + torch.rand(1, generator=generator).item() * 0.2
    flip = draws[3].item() < 0.5
    return affine_transform(img, angle=angle, translate=(tx, ty), scale=scale, flip=flip)


def save_style_code(code: torch.Tensor, path: str | Path) -> None:
    """Write a style code as magic + u32 dimension header + float32 payload."""
    values = code.detach().to(torch.float32).reshape(-1)
    payload = CODE_FILE_MAGIC + struct.pack("<I", values.numel()) + values.numpy().tobytes()
    Path(path).write_bytes(payload)


def load_style_code(path: str | Path) -> torch.Tensor:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != CODE_FILE_MAGIC:
        raise IntegrityError(f"{path}: not a style code file")
    (dim,) = struct.unpack("<I", data[4:8])
    expected = 8 + 4 * dim
    if len(data) != expected:
        raise IntegrityError(f"{path}: truncated style code (expected {expected} bytes)")
    import numpy as np

    values = np.frombuffer(data[8:], dtype=np.float32).copy()
    return torch.from_numpy(values)
