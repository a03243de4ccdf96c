"""Command-line entry points.

Exit codes: 0 success, 2 usage error, 3 data/integrity error, 4 runtime
failure. Every command accepts --config (YAML, flat dotted keys) and
--set key=value overrides; flags take precedence over the file.
"""

import functools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np
import torch

from .config import Config, load_config
from .errors import ConfigError, IntegrityError

EXIT_DATA = 3
EXIT_RUNTIME = 4


def _parse_overrides(pairs: tuple[str, ...]) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = _coerce(value.strip())
    return overrides


def _coerce(value: str):
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    if value.startswith("["):
        return json.loads(value)
    return value


def _build_config(config_path: str | None, set_pairs: tuple[str, ...]) -> Config:
    try:
        return load_config(config_path, _parse_overrides(set_pairs))
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc


def guarded(fn):
    """Translate exceptions into the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except IntegrityError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except FileNotFoundError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (ConfigError, ValueError) as exc:
            raise click.UsageError(str(exc)) from exc
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


config_options = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="YAML config file (flat dotted keys)."),
    click.option("--set", "set_pairs", multiple=True, metavar="KEY=VALUE",
                 help="Override a config key."),
]


def with_config_options(fn):
    for option in reversed(config_options):
        fn = option(fn)
    return fn


@click.group()
def main():
    """3D-aware style-blended face synthesis."""


@main.command()
@click.option("--stage", type=click.IntRange(1, 2), required=True)
@click.option("--natural", "natural_dir", type=click.Path(exists=True), default=None,
              help="Folder of natural-face PNGs (default: synthetic desk set).")
@click.option("--style", "style_dir", type=click.Path(exists=True), default=None,
              help="Folder of style PNGs (default: synthetic desk set).")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--resume", "resume_from", type=click.Path(exists=True), default=None,
              help="Checkpoint to resume from (required for stage 2).")
@click.option("--steps", type=int, default=None, help="Override the stage step count.")
@with_config_options
@guarded
def train(stage, natural_dir, style_dir, out_dir, resume_from, steps,
          config_path, set_pairs):
    """Run one training stage and emit checkpoints."""
    from . import data
    from .training import train as run_training

    cfg = _build_config(config_path, set_pairs)
    if steps is not None:
        key = "train.stage1_steps" if stage == 1 else "train.stage2_steps"
        cfg.update({key: steps})
    size = cfg["model.image_size"]
    datasets = {}
    if natural_dir:
        datasets["natural"] = data.load_image_folder(natural_dir, size)
    else:
        datasets["natural"] = data.synthetic_natural(64, size, seed=cfg["train.seed"])
    if stage == 2:
        if style_dir:
            datasets["style"] = data.load_image_folder(style_dir, size)
        else:
            datasets["style"] = data.synthetic_styles(64, size, seed=cfg["train.seed"] + 1)
    paths = run_training(stage, cfg, datasets, out_dir, resume_from=resume_from)
    for path in paths:
        click.echo(str(path))


@main.command()
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--style", "style_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Style image (PNG).")
@click.option("--style-seed", type=int, default=None,
              help="Draw the style code from this seed instead of an image.")
@click.option("--pitch", type=float, default=math.pi / 2)
@click.option("--yaw", type=float, default=math.pi / 2)
@click.option("--split-index", type=int, default=11)
@click.option("--res", "resolution", type=int, default=128)
@click.option("--views", type=int, default=None,
              help="Render K views with evenly spaced yaw instead of one.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@guarded
def render(ckpt, seed, style_path, style_seed, pitch, yaw, split_index,
           resolution, views, out_path):
    """Render one image (or an evenly spaced multi-view set) to PNG."""
    from .rendering import image_to_png_bytes, png_bytes_to_image
    from .training import load_generator_from_checkpoint

    generator, encoder, cfg = load_generator_from_checkpoint(ckpt)
    n = generator.n_sites
    if not 0 <= split_index <= n:
        raise click.UsageError(f"--split-index must be in [0, {n}]")
    if style_path is not None and style_seed is not None:
        raise click.UsageError("--style and --style-seed are mutually exclusive")

    z_style = None
    if style_path is not None:
        img = png_bytes_to_image(Path(style_path).read_bytes())
        size = cfg["model.image_size"]
        if img.shape[-1] != size:
            img = torch.nn.functional.interpolate(
                img[None], size=(size, size), mode="bilinear", align_corners=False)[0]
        with torch.no_grad():
            z_style = encoder(img[None])
    elif style_seed is not None:
        rng = torch.Generator().manual_seed(style_seed)
        z_style = torch.randn(1, generator.style_dim, generator=rng)

    if views is not None:
        if views < 1:
            raise click.UsageError("--views must be >= 1")
        yaws = np.linspace(*cfg.yaw_range, num=views)
    else:
        yaws = [yaw]

    out_path = Path(out_path)
    written = []
    for i, view_yaw in enumerate(yaws):
        rng = torch.Generator().manual_seed(seed)
        z = torch.randn(1, generator.identity_dim, generator=rng)
        with torch.no_grad():
            image = generator.synthesize(
                z, z_style, split_index, torch.tensor([pitch]),
                torch.tensor([float(view_yaw)]), resolution=resolution,
                n_samples=cfg["model.n_samples"], generator=rng)
        if views is not None:
            target = out_path.with_name(f"{out_path.stem}_view{i}{out_path.suffix or '.png'}")
        else:
            target = out_path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(image_to_png_bytes(image[0]))
        written.append(target)
    for path in written:
        click.echo(str(path))


@main.command()
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--grid", default="64x16,128x16,128x32",
              help="Comma-separated RESxNS cells.")
@click.option("--frames", type=int, default=10)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write line-delimited records here.")
@guarded
def benchmark(ckpt, grid, frames, out_path):
    """Time rendering with and without the neural super-resolution path."""
    from .benchmark import comparison_benchmark
    from .training import load_generator_from_checkpoint

    generator, _, _ = load_generator_from_checkpoint(ckpt)
    cells = []
    for cell in grid.split(","):
        res, ns = cell.lower().split("x")
        cells.append((int(res), int(ns)))
    reports = comparison_benchmark(generator, cells, frames=frames)
    click.echo(f"{'res':>5} {'ns':>4} {'path':>7} {'fps':>10}")
    lines = []
    for report in reports:
        fps = "OOM" if report.oom else f"{report.fps:10.2f}"
        path_name = "w/ nr" if report.with_nr else "w/o nr"
        click.echo(f"{report.resolution:>5} {report.n_samples_per_ray:>4} "
                   f"{path_name:>7} {fps:>10}")
        lines.append(json.dumps(report.as_record()))
    if out_path:
        Path(out_path).write_text("\n".join(lines) + "\n")


@main.command()
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--reference", "reference_dir", type=click.Path(exists=True), default=None,
              help="Folder of reference PNGs (default: synthetic style set).")
@click.option("--n-samples", type=int, default=128, help="Generated sample count.")
@click.option("--n-identities", type=int, default=8)
@click.option("--n-styles", type=int, default=4)
@click.option("--out", "out_path", type=click.Path(), default=None)
@with_config_options
@guarded
def evaluate(ckpt, reference_dir, n_samples, n_identities, n_styles, out_path,
             config_path, set_pairs):
    """Compute FID/KID/IS against a reference set plus pairwise diversity."""
    from . import data
    from .encoder import RandomFeatureExtractor
    from .metrics import (MetricReport, ProxyPerceptualDistance, fid,
                          inception_score, kid, lpips_diversity)
    from .training import load_generator_from_checkpoint

    generator, _, cfg = load_generator_from_checkpoint(ckpt)
    if config_path or set_pairs:
        cfg = _build_config(config_path, set_pairs)
    size = cfg["model.image_size"]
    if reference_dir:
        reference = data.load_image_folder(reference_dir, size)
    else:
        reference = data.synthetic_styles(n_samples, size, seed=3)

    extractor = RandomFeatureExtractor(width=16, seed=5)

    def features_of(images: torch.Tensor) -> np.ndarray:
        feats = []
        with torch.no_grad():
            for start in range(0, images.shape[0], 16):
                chunk = images[start:start + 16]
                pooled = [f.mean(dim=(2, 3)) for f in extractor(chunk)]
                feats.append(torch.cat(pooled, dim=1))
        return torch.cat(feats).numpy()

    def sample_images(n: int, seed0: int) -> torch.Tensor:
        images = []
        with torch.no_grad():
            for i in range(n):
                rng = torch.Generator().manual_seed(seed0 + i)
                z = torch.randn(1, generator.identity_dim, generator=rng)
                z_s = torch.randn(1, generator.style_dim, generator=rng)
                pitch = torch.empty(1).uniform_(*cfg.pitch_range, generator=rng)
                yaw = torch.empty(1).uniform_(*cfg.yaw_range, generator=rng)
                images.append(generator.synthesize(
                    z, z_s, 0, pitch, yaw, resolution=size,
                    n_samples=cfg["model.n_samples"], generator=rng)[0])
        return torch.stack(images)

    generated = sample_images(n_samples, seed0=10_000)
    feats_gen = features_of(generated)
    feats_ref = features_of(reference)
    probs = torch.softmax(torch.from_numpy(feats_gen[:, :8]), dim=1).numpy()

    distance = ProxyPerceptualDistance()

    def sample_image(identity: int, style: int) -> torch.Tensor:
        rng = torch.Generator().manual_seed(20_000 + identity)
        z = torch.randn(1, generator.identity_dim, generator=rng)
        style_rng = torch.Generator().manual_seed(30_000 + style)
        z_s = torch.randn(1, generator.style_dim, generator=style_rng)
        with torch.no_grad():
            return generator.synthesize(
                z, z_s, 0, torch.tensor([math.pi / 2]), torch.tensor([math.pi / 2]),
                resolution=size, n_samples=cfg["model.n_samples"], generator=rng)[0]

    block = min(feats_gen.shape[0], feats_ref.shape[0], 128)
    reports = [
        MetricReport("fid", fid(feats_gen, feats_ref), n_samples, cfg.content_hash()),
        MetricReport("kid", kid(feats_gen, feats_ref, block_size=block),
                     n_samples, cfg.content_hash()),
        MetricReport("is", inception_score(probs), n_samples, cfg.content_hash()),
        MetricReport("lpips_diversity",
                     lpips_diversity(sample_image, n_identities, n_styles, distance),
                     n_identities * n_styles, cfg.content_hash()),
    ]
    click.echo(f"{'metric':>16} {'value':>12} {'n':>7}")
    lines = []
    for report in reports:
        click.echo(f"{report.name:>16} {report.value:>12.5f} {report.n_samples:>7}")
        lines.append(json.dumps(report.as_record()))
    if out_path:
        Path(out_path).write_text("\n".join(lines) + "\n")


@main.command("encode-style")
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@guarded
def encode_style(ckpt, image_path, out_path):
    """Encode a style image to a 512-dim code file (u32 dim header + f32)."""
    from .encoder import save_style_code
    from .rendering import png_bytes_to_image
    from .training import load_generator_from_checkpoint

    _, encoder, cfg = load_generator_from_checkpoint(ckpt)
    img = png_bytes_to_image(Path(image_path).read_bytes())
    size = cfg["model.image_size"]
    if img.shape[-1] != size:
        img = torch.nn.functional.interpolate(
            img[None], size=(size, size), mode="bilinear", align_corners=False)[0]
    with torch.no_grad():
        code = encoder(img[None])[0]
    save_style_code(code, out_path)
    click.echo(f"{out_path} ({code.numel()} dims)")


@main.command()
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--port", type=int, default=8321)
@click.option("--host", default="127.0.0.1")
@guarded
def serve(ckpt, port, host):
    """Serve the render API over HTTP."""
    from .service.app import serve as run_service

    run_service(ckpt, port=port, host=host)


if __name__ == "__main__":
    main()
