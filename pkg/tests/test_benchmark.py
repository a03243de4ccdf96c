"""Speed benchmark harness contracts."""

import pytest
import torch

from blendfield.benchmark import comparison_benchmark, measure_fps, speed_benchmark
from blendfield.generator import StyleFieldGenerator


@pytest.fixture(scope="module")
def tiny_model():
    torch.manual_seed(0)
    model = StyleFieldGenerator(hidden=16, feature_channels=8,
                                renderer_widths=(8, 8, 8), mapping_hidden=32,
                                chunk_rays=4096)
    model.eval()
    return model


def test_report_per_grid_cell(tiny_model):
    grid = [(16, 2), (32, 2)]
    reports = speed_benchmark(tiny_model, grid, with_nr=True, frames=2)
    assert len(reports) == len(grid)
    for report, (res, ns) in zip(reports, grid):
        assert report.resolution == res
        assert report.n_samples_per_ray == ns
        assert report.oom or report.fps > 0


def test_comparison_emits_both_paths(tiny_model):
    reports = comparison_benchmark(tiny_model, [(32, 2)], frames=2)
    assert [r.with_nr for r in reports] == [False, True]


def test_zero_frames_rejected(tiny_model):
    with pytest.raises(ValueError):
        measure_fps(tiny_model, 16, 2, True, frames=0)


def test_record_schema(tiny_model):
    report = measure_fps(tiny_model, 16, 2, True, frames=2, warmup=1)
    record = report.as_record()
    assert set(record) == {"resolution", "ns", "with_nr", "fps", "frames_timed", "oom"}
    assert record["frames_timed"] == 2


def test_nr_path_faster_at_moderate_settings(tiny_model):
    # the 4x-smaller ray grid should dominate the renderer overhead
    without = measure_fps(tiny_model, 64, 8, with_nr=False, frames=3, warmup=1)
    with_nr = measure_fps(tiny_model, 64, 8, with_nr=True, frames=3, warmup=1)
    assert with_nr.fps > without.fps


def test_oom_reported_as_distinct_outcome():
    class OomModel:
        identity_dim = 8
        n_sites = 11

        def eval(self):
            return self

        def synthesize(self, *args, **kwargs):
            raise RuntimeError("CUDA out of memory: tried to allocate everything")

    report = measure_fps(OomModel(), 256, 48, with_nr=False, frames=3)
    assert report.oom is True
    assert report.fps is None
    assert report.frames_timed == 0


@pytest.mark.xfail(strict=False, reason=(
    "needs a quiet dedicated CPU: on shared 2-core hosts identical runs "
    "drift far beyond the 20% stability budget (measured spread up to 1.7x)"))
def test_repeated_runs_stay_within_flaky_guard(tiny_model):
    # timing stability guard: medians of paired runs agree within 20%. The
    # cell is sized so one frame costs tens of ms; a bounded retry separates
    # persistent drift from host scheduling spikes.
    ratios = []
    for _ in range(3):
        a = measure_fps(tiny_model, 64, 8, with_nr=False, frames=10, warmup=3)
        b = measure_fps(tiny_model, 64, 8, with_nr=False, frames=10, warmup=3)
        ratio = a.fps / b.fps
        if 0.8 <= ratio <= 1.25:
            return
        ratios.append(ratio)
    pytest.fail(f"fps drifted between paired runs on every attempt: {ratios}")
