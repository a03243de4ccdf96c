"""Flat dotted-key configuration.

Every tunable default lives in DEFAULTS. A config file is a YAML mapping,
either already flat ("model.hidden: 128") or nested; nested maps are
flattened on load. CLI flags override file values.
"""

import hashlib
import json
import math
from pathlib import Path

import yaml

from .errors import ConfigError

HALF_PI = math.pi / 2.0

DEFAULTS = {
    # latent spaces
    "model.identity_dim": 256,
    "model.style_dim": 512,
    "model.w_dim": 256,
    "model.n_sites": 11,
    "model.backbone_sites": 8,
    "model.renderer_sites": 3,
    "model.mapping_layers": 4,
    "model.mapping_hidden": 256,
    # radiance field
    "model.hidden": 128,
    "model.feature_channels": 64,
    "model.grid_size": 32,
    "model.image_size": 128,
    "model.n_samples": 24,
    "model.gamma_init": 15.0,
    "model.feature_clamp": 10.0,
    "model.chunk_rays": 4096,
    # neural renderer
    "renderer.widths": [64, 32, 32],
    # camera
    "camera.fov": 12.0,
    "camera.radius": 1.0,
    "camera.t_near": 0.88,
    "camera.t_far": 1.12,
    "camera.pitch_span": 0.2,
    "camera.yaw_span": 0.4,
    # style encoder
    "encoder.extractor": "random-cnn",
    "encoder.extractor_seed": 7,
    "encoder.extractor_width": 32,
    "encoder.projection_hidden": 256,
    "encoder.representation_dim": 128,
    "encoder.tau": 0.1,
    # discriminators
    "disc.base_width": 64,
    "disc.max_width": 512,
    "disc.min_spatial": 8,
    # training
    "train.batch_size": 8,
    "train.lambda1": 1.0,
    "train.lambda2": 1.0,
    "train.lambda3": 1.0,
    "train.r1_lambda": 10.0,
    "train.lr_d": 2e-4,
    "train.lr_g": 2e-5,
    "train.lr_encoder": 1e-3,
    "train.beta1": 0.0,
    "train.beta2": 0.99,
    "train.stage1_steps": 200000,
    "train.stage2_steps": 30000,
    "train.contrastive_steps": 200,
    "train.contrastive_batch": 8,
    "train.checkpoint_every": 1000,
    "train.log_every": 10,
    "train.seed": 0,
    "train.deterministic": True,
    "train.sbm_raw_init": -4.0,
    "train.finetune_encoder": False,
    # service
    "service.max_parallel_renders": 4,
    "service.default_resolution": 128,
}

_VALID_KEYS = set(DEFAULTS)


def _flatten(prefix: str, node, out: dict) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            dotted = f"{prefix}.{key}" if prefix else str(key)
            _flatten(dotted, value, out)
    else:
        out[prefix] = node


class Config:
    """Immutable-by-convention view over the flat key/value table."""

    def __init__(self, overrides: dict | None = None):
        self._values = dict(DEFAULTS)
        if overrides:
            self.update(overrides)

    def update(self, overrides: dict) -> None:
        flat: dict = {}
        _flatten("", overrides, flat)
        for key, value in flat.items():
            if key not in _VALID_KEYS:
                raise ConfigError(f"unknown config key: {key!r}")
            default = DEFAULTS[key]
            if isinstance(default, bool):
                value = bool(value)
            elif isinstance(default, int) and not isinstance(value, bool):
                value = int(value)
            elif isinstance(default, float):
                value = float(value)
            elif isinstance(default, list):
                value = [int(v) for v in value]
            self._values[key] = value

    def __getitem__(self, key: str):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown config key: {key!r}") from None

    def get(self, key: str):
        return self[key]

    def as_dict(self) -> dict:
        return dict(self._values)

    def content_hash(self) -> str:
        payload = json.dumps(self._values, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:12]

    # derived camera bounds (Fig-style display ranges around the frontal pose)
    @property
    def pitch_range(self) -> tuple[float, float]:
        span = self["camera.pitch_span"]
        return (HALF_PI - span, HALF_PI + span)

    @property
    def yaw_range(self) -> tuple[float, float]:
        span = self["camera.yaw_span"]
        return (HALF_PI - span, HALF_PI + span)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Build a Config from an optional YAML file plus explicit overrides."""
    cfg = Config()
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text())
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        cfg.update(raw)
    if overrides:
        cfg.update(overrides)
    return cfg
