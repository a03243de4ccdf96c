"""Camera model and ray generation.

Cameras sit on a sphere of configurable radius and look at the origin.
The position convention for a (pitch, yaw) pair is

    pos = r * (sin(pitch) * cos(yaw), cos(pitch), sin(pitch) * sin(yaw))

so the canonical frontal pose (pi/2, pi/2) places the camera at (0, 0, r)
looking down -z with +y up.
"""

import math
from dataclasses import dataclass

import torch

from .config import HALF_PI

WORLD_UP = (0.0, 1.0, 0.0)


@dataclass
class CameraPose:
    pitch: float
    yaw: float
    radius: float = 1.0
    fov: float = 12.0  # full field of view, degrees

    def __post_init__(self):
        if not (math.isfinite(self.pitch) and math.isfinite(self.yaw)):
            raise ValueError("pitch/yaw must be finite")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


FRONTAL = (HALF_PI, HALF_PI)


@dataclass
class RayBundle:
    origins: torch.Tensor     # [R, 3]
    directions: torch.Tensor  # [R, 3], unit norm
    depths: torch.Tensor      # [R, N_s], strictly increasing in [t_near, t_far]
    t_near: float
    t_far: float


def camera_position(pitch: torch.Tensor, yaw: torch.Tensor, radius: float) -> torch.Tensor:
    """Spherical placement, batched over leading dims. Returns [..., 3]."""
    sp = torch.sin(pitch)
    return radius * torch.stack([sp * torch.cos(yaw), torch.cos(pitch), sp * torch.sin(yaw)], dim=-1)


def camera_rays(
    pitch: torch.Tensor,
    yaw: torch.Tensor,
    radius: float,
    fov: float,
    resolution: int,
    n_samples: int,
    t_near: float,
    t_far: float,
    generator: torch.Generator | None = None,
    dtype: torch.dtype = torch.float32,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Batched pinhole rays with stratified depth samples.

    pitch/yaw are [B] tensors. Returns (origins [B,R,3], directions [B,R,3],
    depths [B,R,N]) with R = resolution**2, rays in row-major pixel order
    (row 0 is the top of the image).
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if t_near >= t_far:
        raise ValueError("t_near must be < t_far")
    pitch = torch.as_tensor(pitch, dtype=dtype).reshape(-1)
    yaw = torch.as_tensor(yaw, dtype=dtype).reshape(-1)
    batch = pitch.shape[0]

    pos = camera_position(pitch, yaw, radius)                      # [B, 3]
    forward = torch.nn.functional.normalize(-pos, dim=-1)          # [B, 3]
    world_up = torch.tensor(WORLD_UP, dtype=dtype).expand(batch, 3)
    right = torch.nn.functional.normalize(torch.cross(forward, world_up, dim=-1), dim=-1)
    up = torch.cross(right, forward, dim=-1)

    # pixel-center offsets in NDC; v flipped so row 0 maps to +up
    steps = (torch.arange(resolution, dtype=dtype) + 0.5) / resolution * 2.0 - 1.0
    u = steps.repeat(resolution)                                   # [R]
    v = -steps.repeat_interleave(resolution)                       # [R]
    half_tan = math.tan(math.radians(fov) / 2.0)

    dirs = (
        forward[:, None, :]
        + half_tan * (u[None, :, None] * right[:, None, :] + v[None, :, None] * up[:, None, :])
    )
    dirs = torch.nn.functional.normalize(dirs, dim=-1)             # [B, R, 3]
    origins = pos[:, None, :].expand_as(dirs)

    n_rays = resolution * resolution
    delta = (t_far - t_near) / n_samples
    jitter = torch.rand((batch, n_rays, n_samples), generator=generator, dtype=dtype)
    bins = torch.arange(n_samples, dtype=dtype)
    depths = t_near + (bins[None, None, :] + jitter) * delta       # sample j stays in bin j
    return origins, dirs, depths


def generate_rays(
    pose: CameraPose,
    resolution: int,
    n_samples: int,
    t_near: float = 0.88,
    t_far: float = 1.12,
    seed: int | None = None,
    dtype: torch.dtype = torch.float32,
) -> RayBundle:
    """Single-pose convenience wrapper around camera_rays."""
    generator = None
    if seed is not None:
        generator = torch.Generator().manual_seed(seed)
    origins, dirs, depths = camera_rays(
        torch.tensor([pose.pitch]),
        torch.tensor([pose.yaw]),
        pose.radius,
        pose.fov,
        resolution,
        n_samples,
        t_near,
        t_far,
        generator=generator,
        dtype=dtype,
    )
    return RayBundle(origins[0], dirs[0], depths[0], t_near, t_far)


def sample_poses(
    batch: int,
    pitch_range: tuple[float, float],
    yaw_range: tuple[float, float],
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Uniform training poses over the display ranges. Returns ([B], [B])."""
    pitch = torch.empty(batch).uniform_(*pitch_range, generator=generator)
    yaw = torch.empty(batch).uniform_(*yaw_range, generator=generator)
    return pitch, yaw
