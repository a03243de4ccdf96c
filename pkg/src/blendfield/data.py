"""Image datasets: synthetic desk-scale sets and on-disk folders.

The synthetic generators produce smooth face-like blobs (natural set) and
strongly colored texture patches (style set) so adversarial and contrastive
training have structure to latch onto without any external downloads.
"""

from pathlib import Path

import numpy as np
import torch

from .rendering import png_bytes_to_image


def _coordinate_grid(size: int) -> tuple[torch.Tensor, torch.Tensor]:
    axis = torch.linspace(-1.0, 1.0, size)
    return torch.meshgrid(axis, axis, indexing="ij")


def synthetic_natural(n: int, size: int = 32, seed: int = 0) -> torch.Tensor:
    """Soft elliptical blobs on dark backgrounds, vaguely face-like. [-1, 1]."""
    generator = torch.Generator().manual_seed(seed)
    yy, xx = _coordinate_grid(size)
    images = torch.empty(n, 3, size, size)
    for i in range(n):
        params = torch.rand(8, generator=generator)
        cx = (params[0] - 0.5) * 0.4
        cy = (params[1] - 0.5) * 0.4
        rx = 0.35 + params[2] * 0.3
        ry = 0.45 + params[3] * 0.3
        tint = 0.3 + params[4:7] * 0.5
        blob = torch.exp(-(((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2) * 2.0)
        eyes = torch.exp(-(((xx - cx - 0.25) / 0.1) ** 2 + ((yy - cy + 0.2) / 0.1) ** 2) * 4.0)
        eyes = eyes + torch.exp(-(((xx - cx + 0.25) / 0.1) ** 2 + ((yy - cy + 0.2) / 0.1) ** 2) * 4.0)
        base = blob[None] * tint[:, None, None] - eyes[None] * 0.5
        images[i] = (base * 2.0 - 1.0 + params[7] * 0.2).clamp(-1, 1)
    return images


def synthetic_styles(n: int, size: int = 32, seed: int = 1) -> torch.Tensor:
    """Distinct palette/stripe textures; each index is its own 'style'. [-1, 1]."""
    generator = torch.Generator().manual_seed(seed)
    yy, xx = _coordinate_grid(size)
    images = torch.empty(n, 3, size, size)
    for i in range(n):
        params = torch.rand(10, generator=generator)
        freq = 2.0 + params[0] * 6.0
        angle = float(params[1]) * 3.14159
        phase = params[2] * 6.28318
        color_a = params[3:6] * 2.0 - 1.0
        color_b = params[6:9] * 2.0 - 1.0
        wave = torch.sin(freq * (xx * np.cos(angle) + yy * np.sin(angle)) * 3.14159 + phase)
        mix = (wave[None] * 0.5 + 0.5)
        img = mix * color_a[:, None, None] + (1 - mix) * color_b[:, None, None]
        images[i] = img.clamp(-1, 1)
    return images


def load_image_folder(path: str | Path, size: int | None = None) -> torch.Tensor:
    """Stack every PNG under path into [N, 3, H, W] in [-1, 1]."""
    import torch.nn.functional as F

    files = sorted(Path(path).glob("*.png"))
    if not files:
        raise FileNotFoundError(f"no .png files under {path}")
    images = []
    for file in files:
        img = png_bytes_to_image(file.read_bytes())
        if size is not None and img.shape[-1] != size:
            img = F.interpolate(img[None], size=(size, size), mode="bilinear",
                                align_corners=False)[0]
        images.append(img)
    return torch.stack(images)
