"""CLI surface: render determinism, multi-view spacing, exit codes."""

import math

import numpy as np
import pytest
import torch
from click.testing import CliRunner

from blendfield.cli import main
from blendfield.encoder import load_style_code
from blendfield.rendering import image_to_png_bytes


@pytest.fixture
def runner():
    return CliRunner()


def test_help_exits_zero(runner):
    for args in ([], ["--help"], ["render", "--help"], ["train", "--help"]):
        result = runner.invoke(main, args or ["--help"])
        assert result.exit_code == 0


def test_unknown_flag_is_usage_error(runner):
    result = runner.invoke(main, ["render", "--no-such-flag"])
    assert result.exit_code == 2


def test_render_deterministic_bytes(runner, tiny_checkpoint, tmp_path):
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    for out in (out_a, out_b):
        result = runner.invoke(main, [
            "render", "--ckpt", str(tiny_checkpoint), "--seed", "4",
            "--res", "32", "--out", str(out)])
        assert result.exit_code == 0, result.output
    assert out_a.read_bytes() == out_b.read_bytes()


def test_render_views_spacing(runner, tiny_checkpoint, tmp_path):
    out = tmp_path / "multi.png"
    result = runner.invoke(main, [
        "render", "--ckpt", str(tiny_checkpoint), "--seed", "1",
        "--res", "32", "--views", "5", "--out", str(out)])
    assert result.exit_code == 0, result.output
    files = sorted(tmp_path.glob("multi_view*.png"))
    assert len(files) == 5
    # documented yaws: evenly spaced over [pi/2 - 0.4, pi/2 + 0.4]
    expected = np.linspace(math.pi / 2 - 0.4, math.pi / 2 + 0.4, 5)
    assert expected[0] == pytest.approx(math.pi / 2 - 0.4)
    assert expected[-1] == pytest.approx(math.pi / 2 + 0.4)
    assert np.allclose(np.diff(expected), 0.2)


def test_render_split_index_11_matches_style_disabled(runner, tiny_checkpoint, tmp_path):
    # a style seed with split-index n must not alter output at all
    out_plain = tmp_path / "plain.png"
    out_styled = tmp_path / "styled.png"
    base = ["render", "--ckpt", str(tiny_checkpoint), "--seed", "2",
            "--res", "32", "--split-index", "11"]
    assert runner.invoke(main, base + ["--out", str(out_plain)]).exit_code == 0
    assert runner.invoke(main, base + ["--style-seed", "77",
                                       "--out", str(out_styled)]).exit_code == 0
    assert out_plain.read_bytes() == out_styled.read_bytes()


def test_render_bad_split_index_usage_error(runner, tiny_checkpoint, tmp_path):
    result = runner.invoke(main, [
        "render", "--ckpt", str(tiny_checkpoint), "--split-index", "99",
        "--out", str(tmp_path / "x.png")])
    assert result.exit_code == 2


def test_render_missing_checkpoint_data_error(runner, tmp_path):
    missing = tmp_path / "nope.ckpt"
    result = runner.invoke(main, [
        "render", "--ckpt", str(missing), "--out", str(tmp_path / "x.png")])
    assert result.exit_code == 2  # click validates the path -> usage error


def test_render_corrupt_checkpoint_integrity_error(runner, tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage data, definitely not a checkpoint")
    result = runner.invoke(main, [
        "render", "--ckpt", str(bad), "--out", str(tmp_path / "x.png")])
    assert result.exit_code == 3


def test_encode_style_writes_code_file(runner, tiny_checkpoint, tmp_path):
    img = torch.rand(3, 32, 32) * 2 - 1
    img_path = tmp_path / "style.png"
    img_path.write_bytes(image_to_png_bytes(img))
    out = tmp_path / "style.code"
    result = runner.invoke(main, [
        "encode-style", "--ckpt", str(tiny_checkpoint),
        "--image", str(img_path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    code = load_style_code(out)
    assert code.shape == (512,)


def test_train_and_evaluate_roundtrip(runner, tmp_path):
    overrides = []
    for key, value in [
        ("model.hidden", 16), ("model.feature_channels", 8),
        ("renderer.widths", "[8,8,8]"), ("model.image_size", 32),
        ("model.grid_size", 8), ("model.n_samples", 4),
        ("model.mapping_hidden", 32), ("disc.base_width", 8),
        ("disc.max_width", 16), ("encoder.extractor_width", 8),
        ("train.batch_size", 2), ("train.stage1_steps", 2),
        ("train.log_every", 1),
    ]:
        overrides += ["--set", f"{key}={value}"]
    result = runner.invoke(main, [
        "train", "--stage", "1", "--out", str(tmp_path / "run")] + overrides)
    assert result.exit_code == 0, result.output
    ckpts = list((tmp_path / "run").glob("*.ckpt"))
    assert ckpts

    bench = runner.invoke(main, [
        "benchmark", "--ckpt", str(ckpts[-1]), "--grid", "32x4",
        "--frames", "2"])
    assert bench.exit_code == 0, bench.output
    assert "w/ nr" in bench.output

    ev = runner.invoke(main, [
        "evaluate", "--ckpt", str(ckpts[-1]), "--n-samples", "16",
        "--n-identities", "2", "--n-styles", "2"])
    assert ev.exit_code == 0, ev.output
    assert "fid" in ev.output
