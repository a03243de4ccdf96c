"""Full generator: dual mapping networks + style blender + conditional
radiance field + neural super-resolution.

The render path volume-renders a low-resolution feature grid (one quarter of
the output resolution) and upsamples it with the neural renderer; the direct
path ray-marches every output pixel and projects features straight to RGB,
which is the reference point for the speed benchmark.
"""

import torch
import torch.nn as nn

from .camera import CameraPose, camera_rays
from .config import Config
from .field import FilmSirenField, volume_render
from .latents import FusedLatents, MappingNetwork, StyleBlender
from .rendering import NeuralRenderer, squash_rgb


class StyleFieldGenerator(nn.Module):
    def __init__(self, identity_dim: int = 256, style_dim: int = 512, w_dim: int = 256,
                 n_sites: int = 11, backbone_sites: int = 8, hidden: int = 128,
                 feature_channels: int = 64, renderer_widths=(64, 32, 32),
                 mapping_hidden: int = 256, mapping_layers: int = 4,
                 gamma_init: float = 15.0, feature_clamp: float = 10.0,
                 sbm_raw_init: float = 0.0, fov: float = 12.0, radius: float = 1.0,
                 t_near: float = 0.88, t_far: float = 1.12, chunk_rays: int = 4096):
        super().__init__()
        if n_sites - backbone_sites != len(renderer_widths):
            raise ValueError(
                "renderer latent sites (n_sites - backbone_sites) must match "
                "the number of renderer blocks")
        self.identity_dim = identity_dim
        self.style_dim = style_dim
        self.n_sites = n_sites
        self.backbone_sites = backbone_sites
        self.feature_channels = feature_channels
        self.fov = fov
        self.radius = radius
        self.t_near = t_near
        self.t_far = t_far
        self.chunk_rays = chunk_rays

        self.identity_mapping = MappingNetwork(
            identity_dim, w_dim, n_sites, mapping_hidden, mapping_layers)
        self.style_mapping = MappingNetwork(
            style_dim, w_dim, n_sites, mapping_hidden, mapping_layers)
        self.blender = StyleBlender(n_sites, backbone_sites, w_dim, raw_init=sbm_raw_init)
        self.field = FilmSirenField(
            n_layers=backbone_sites, hidden=hidden, w_dim=w_dim,
            feature_channels=feature_channels, gamma_init=gamma_init,
            feature_clamp=feature_clamp)
        self.renderer = NeuralRenderer(feature_channels, renderer_widths, w_dim)
        # 1x1 projection used by the direct (no super-resolution) path
        self.direct_rgb = nn.Conv2d(feature_channels, 3, kernel_size=1)

    def map_to_wplus(self, code: torch.Tensor, which: str) -> torch.Tensor:
        if which == "identity":
            return self.identity_mapping(code)
        if which == "style":
            return self.style_mapping(code)
        raise ValueError(f"which must be 'identity' or 'style', got {which!r}")

    def fuse_latents(self, z_identity: torch.Tensor, z_style: torch.Tensor | None,
                     split_index: int) -> FusedLatents:
        w_identity = self.identity_mapping(z_identity)
        w_style = None
        if z_style is not None and split_index < self.n_sites:
            w_style = self.style_mapping(z_style)
        return self.blender(w_identity, w_style, split_index)

    def feature_grid(self, fused: FusedLatents, pitch: torch.Tensor, yaw: torch.Tensor,
                     grid_size: int, n_samples: int,
                     generator: torch.Generator | None = None) -> torch.Tensor:
        """Volume-render the backbone into a [B, M_f, S, S] feature grid."""
        dtype = fused.backbone.dtype
        origins, dirs, depths = camera_rays(
            pitch, yaw, self.radius, self.fov, grid_size, n_samples,
            self.t_near, self.t_far, generator=generator, dtype=dtype)
        batch, n_rays, _ = dirs.shape
        feats = []
        for start in range(0, n_rays, self.chunk_rays):
            stop = min(start + self.chunk_rays, n_rays)
            d = dirs[:, start:stop]
            t = depths[:, start:stop]
            points = origins[:, start:stop, None, :] + t[..., None] * d[:, :, None, :]
            flat_points = points.reshape(batch, -1, 3)
            flat_dirs = d[:, :, None, :].expand_as(points).reshape(batch, -1, 3)
            sigma, feat = self.field(flat_points, flat_dirs, fused.backbone)
            sigma = sigma.reshape(batch, stop - start, n_samples)
            feat = feat.reshape(batch, stop - start, n_samples, self.feature_channels)
            feats.append(volume_render(sigma, feat, t, self.t_far))
        grid = torch.cat(feats, dim=1)                            # [B, R, M_f]
        return grid.permute(0, 2, 1).reshape(batch, self.feature_channels,
                                             grid_size, grid_size)

    def render_feature_grid(self, pose: CameraPose, fused: FusedLatents,
                            n_samples: int, seed: int,
                            grid_size: int = 32) -> torch.Tensor:
        """Single-pose feature grid [M_f, S, S], deterministic per seed."""
        generator = torch.Generator().manual_seed(seed)
        batched = FusedLatents(
            fused.backbone if fused.backbone.dim() == 3 else fused.backbone[None],
            fused.renderer if fused.renderer.dim() == 3 else fused.renderer[None])
        grid = self.feature_grid(batched, torch.tensor([pose.pitch]),
                                 torch.tensor([pose.yaw]), grid_size,
                                 n_samples, generator)
        return grid[0]

    def synthesize(self, z_identity: torch.Tensor, z_style: torch.Tensor | None,
                   split_index: int, pitch: torch.Tensor, yaw: torch.Tensor,
                   resolution: int = 128, n_samples: int = 24,
                   generator: torch.Generator | None = None,
                   use_neural_renderer: bool = True) -> torch.Tensor:
        """Render [B, 3, resolution, resolution] images in (-1, 1)."""
        fused = self.fuse_latents(z_identity, z_style, split_index)
        if use_neural_renderer:
            factor = 2 ** self.renderer.n_upsamples
            if resolution % factor != 0:
                raise ValueError(
                    f"resolution must be a multiple of {factor} for the neural renderer")
            grid = self.feature_grid(fused, pitch, yaw, resolution // factor,
                                     n_samples, generator)
            return self.renderer(grid, fused.renderer)
        grid = self.feature_grid(fused, pitch, yaw, resolution, n_samples, generator)
        return squash_rgb(self.direct_rgb(grid))


def build_generator(cfg: Config) -> StyleFieldGenerator:
    return StyleFieldGenerator(
        identity_dim=cfg["model.identity_dim"],
        style_dim=cfg["model.style_dim"],
        w_dim=cfg["model.w_dim"],
        n_sites=cfg["model.n_sites"],
        backbone_sites=cfg["model.backbone_sites"],
        hidden=cfg["model.hidden"],
        feature_channels=cfg["model.feature_channels"],
        renderer_widths=tuple(cfg["renderer.widths"]),
        mapping_hidden=cfg["model.mapping_hidden"],
        mapping_layers=cfg["model.mapping_layers"],
        gamma_init=cfg["model.gamma_init"],
        feature_clamp=cfg["model.feature_clamp"],
        sbm_raw_init=cfg["train.sbm_raw_init"],
        fov=cfg["camera.fov"],
        radius=cfg["camera.radius"],
        t_near=cfg["camera.t_near"],
        t_far=cfg["camera.t_far"],
        chunk_rays=cfg["model.chunk_rays"],
    )
