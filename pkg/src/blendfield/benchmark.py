"""Rendering-speed benchmark over a (resolution, samples-per-ray) grid.

Each cell times single-image renders with and without the neural
super-resolution path. Warm-up frames are rendered and discarded before
timing; fps is the median over the timed frames. Out-of-memory is reported
as a distinct outcome rather than an error, mirroring how large
configurations fail in practice.
"""

import statistics
import time
from dataclasses import dataclass

import torch

from .generator import StyleFieldGenerator


@dataclass
class SpeedReport:
    resolution: int
    n_samples_per_ray: int
    with_nr: bool
    fps: float | None
    frames_timed: int
    oom: bool = False

    def as_record(self) -> dict:
        return {"resolution": self.resolution, "ns": self.n_samples_per_ray,
                "with_nr": self.with_nr, "fps": self.fps,
                "frames_timed": self.frames_timed, "oom": self.oom}


def _render_once(model: StyleFieldGenerator, resolution: int, ns: int,
                 with_nr: bool, seed: int) -> None:
    rng = torch.Generator().manual_seed(seed)
    z = torch.randn(1, model.identity_dim, generator=rng)
    pitch = torch.full((1,), torch.pi / 2)
    yaw = torch.full((1,), torch.pi / 2)
    with torch.no_grad():
        model.synthesize(z, None, model.n_sites, pitch, yaw,
                         resolution=resolution, n_samples=ns, generator=rng,
                         use_neural_renderer=with_nr)


def measure_fps(model: StyleFieldGenerator, resolution: int, ns: int,
                with_nr: bool, frames: int, warmup: int = 3) -> SpeedReport:
    if frames < 1:
        raise ValueError("frames must be >= 1")
    try:
        for i in range(warmup):
            _render_once(model, resolution, ns, with_nr, seed=i)
        laps = []
        for i in range(frames):
            start = time.perf_counter()
            _render_once(model, resolution, ns, with_nr, seed=1000 + i)
            laps.append(time.perf_counter() - start)
    except (MemoryError, torch.cuda.OutOfMemoryError):
        return SpeedReport(resolution, ns, with_nr, fps=None, frames_timed=0, oom=True)
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            return SpeedReport(resolution, ns, with_nr, fps=None, frames_timed=0, oom=True)
        raise
    fps = 1.0 / statistics.median(laps)
    return SpeedReport(resolution, ns, with_nr, fps=fps, frames_timed=frames)


def speed_benchmark(model: StyleFieldGenerator, grid: list[tuple[int, int]],
                    with_nr: bool, frames: int = 10) -> list[SpeedReport]:
    """Time every (resolution, ns) cell for one rendering path."""
    model.eval()
    return [measure_fps(model, res, ns, with_nr, frames) for res, ns in grid]


def comparison_benchmark(model: StyleFieldGenerator, grid: list[tuple[int, int]],
                         frames: int = 10) -> list[SpeedReport]:
    """Both paths for every cell, without-NR first."""
    reports = []
    for res, ns in grid:
        reports.append(measure_fps(model, res, ns, with_nr=False, frames=frames))
        reports.append(measure_fps(model, res, ns, with_nr=True, frames=frames))
    return reports
