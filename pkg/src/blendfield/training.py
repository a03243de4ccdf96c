"""Two-stage adversarial training.

Stage 1 trains the generator against the natural-face discriminator only
(style and conditional weights zeroed), teaching the radiance field the
source domain. Stage 2 starts from a stage-1 checkpoint, first pre-trains
the style encoder contrastively, then fine-tunes the generator with the
full triple-branch discriminator, the style blending path, and the
negative-code queue.

Every random draw flows through one torch.Generator owned by the train
state; its state is checkpointed together with model parameters, optimizer
state, and queue contents, so an interrupted run resumed from a checkpoint
reproduces the uninterrupted run bit for bit in deterministic mode.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .camera import sample_poses
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Config
from .discriminators import Discriminator, build_triple
from .encoder import StyleEncoder, augment, interleaved_pairs, nt_xent_loss
from .errors import ConfigError, NumericError
from .generator import StyleFieldGenerator, build_generator
from .losses import (EmbeddingQueue, LossParts, LossWeights, adversarial_terms,
                     pose_consistency_loss, r1_penalty, softminus, total_loss)


class MetricLog:
    """Append-only line-delimited (step, name, value) records."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def log(self, step: int, name: str, value: float) -> None:
        record = {"step": int(step), "name": name, "value": float(value)}
        with self.path.open("a") as handle:
            handle.write(json.dumps(record) + "\n")


def read_metric_series(path: str | Path, name: str) -> list[tuple[int, float]]:
    series = []
    with Path(path).open() as handle:
        for line in handle:
            record = json.loads(line)
            if record["name"] == name:
                series.append((record["step"], record["value"]))
    return series


@dataclass
class TrainState:
    cfg: Config
    generator: StyleFieldGenerator
    d_real: Discriminator
    d_style: Discriminator
    d_cond: Discriminator
    encoder: StyleEncoder
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    opt_enc: torch.optim.Adam
    queue: EmbeddingQueue
    rng: torch.Generator
    step: int = 0
    stage: int = 1
    modules: dict = field(init=False)

    def __post_init__(self):
        self.modules = {
            "generator": self.generator,
            "d_real": self.d_real,
            "d_style": self.d_style,
            "d_cond": self.d_cond,
            "encoder": self.encoder,
        }

    def all_parameters(self):
        for module in self.modules.values():
            yield from module.parameters()


def build_train_state(cfg: Config) -> TrainState:
    torch.manual_seed(cfg["train.seed"])
    generator = build_generator(cfg)
    d_real, d_style, d_cond = build_triple(
        cfg["model.image_size"], cfg["disc.base_width"], cfg["disc.max_width"],
        cfg["disc.min_spatial"], condition_dim=cfg["model.style_dim"])
    encoder = StyleEncoder(
        extractor_width=cfg["encoder.extractor_width"],
        extractor_seed=cfg["encoder.extractor_seed"],
        code_dim=cfg["model.style_dim"],
        projection_hidden=cfg["encoder.projection_hidden"],
        representation_dim=cfg["encoder.representation_dim"])
    betas = (cfg["train.beta1"], cfg["train.beta2"])
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg["train.lr_g"], betas=betas)
    disc_params = (list(d_real.parameters()) + list(d_style.parameters())
                   + list(d_cond.parameters()))
    opt_d = torch.optim.Adam(disc_params, lr=cfg["train.lr_d"], betas=betas)
    enc_params = [p for p in encoder.parameters() if p.requires_grad]
    opt_enc = torch.optim.Adam(enc_params, lr=cfg["train.lr_encoder"])
    rng = torch.Generator().manual_seed(cfg["train.seed"] + 1)
    queue = EmbeddingQueue(cfg["train.batch_size"])
    return TrainState(cfg, generator, d_real, d_style, d_cond, encoder,
                      opt_g, opt_d, opt_enc, queue, rng)


# ---------------------------------------------------------------------------
# checkpoint plumbing

def _optimizer_arrays(prefix: str, opt: torch.optim.Optimizer,
                      arrays: dict, meta: dict) -> None:
    sd = opt.state_dict()
    for pid, state in sd["state"].items():
        for key, value in state.items():
            if not isinstance(value, torch.Tensor):
                value = torch.tensor(float(value))
            arrays[f"{prefix}.{pid}.{key}"] = value
    meta[prefix] = {"param_groups": sd["param_groups"],
                    "state_keys": {str(pid): sorted(state)
                                   for pid, state in sd["state"].items()}}


def _load_optimizer(prefix: str, opt: torch.optim.Optimizer,
                    ckpt_arrays: dict, meta: dict) -> None:
    info = meta.get(prefix)
    if info is None:
        return
    state = {}
    for pid_str, keys in info["state_keys"].items():
        pid = int(pid_str)
        state[pid] = {key: ckpt_arrays[f"{prefix}.{pid}.{key}"] for key in keys}
    opt.load_state_dict({"state": state, "param_groups": info["param_groups"]})


def state_to_arrays(state: TrainState) -> tuple[dict, dict]:
    arrays: dict[str, torch.Tensor] = {}
    for name, module in state.modules.items():
        for key, value in module.state_dict().items():
            arrays[f"model.{name}.{key}"] = value
    meta: dict = {}
    _optimizer_arrays("optim.g", state.opt_g, arrays, meta)
    _optimizer_arrays("optim.d", state.opt_d, arrays, meta)
    _optimizer_arrays("optim.enc", state.opt_enc, arrays, meta)
    arrays["queue.codes"] = state.queue.state()
    arrays["rng.train"] = state.rng.get_state()
    return arrays, meta


def save_train_checkpoint(state: TrainState, path: str | Path) -> None:
    arrays, meta = state_to_arrays(state)
    save_checkpoint(path, arrays, step=state.step, stage=state.stage,
                    config=state.cfg.as_dict(), extra=meta)


def restore_train_state(state: TrainState, ckpt, *, full: bool) -> None:
    """Load module weights from a checkpoint; with full=True also restore
    optimizers, queue, RNG, and counters (same-stage resume)."""
    for name, module in state.modules.items():
        module.load_state_dict(ckpt.subset(f"model.{name}"))
    if full:
        _load_optimizer("optim.g", state.opt_g, ckpt.arrays, ckpt.extra)
        _load_optimizer("optim.d", state.opt_d, ckpt.arrays, ckpt.extra)
        _load_optimizer("optim.enc", state.opt_enc, ckpt.arrays, ckpt.extra)
        state.queue.load_state(ckpt.arrays["queue.codes"])
        state.step = ckpt.step
        state.stage = ckpt.stage
    state.rng.set_state(ckpt.arrays["rng.train"].to(torch.uint8))


# ---------------------------------------------------------------------------
# step logic

def _sample_batch(images: torch.Tensor, batch: int, rng: torch.Generator) -> torch.Tensor:
    idx = torch.randint(images.shape[0], (batch,), generator=rng)
    return images[idx]


def _assert_finite_parameters(state: TrainState) -> None:
    for p in state.all_parameters():
        if not torch.isfinite(p).all():
            raise NumericError("non-finite parameter after optimizer step")


def _zero_grads(state: TrainState) -> None:
    state.opt_g.zero_grad(set_to_none=True)
    state.opt_d.zero_grad(set_to_none=True)
    state.opt_enc.zero_grad(set_to_none=True)


def _zero(dtype=torch.float32) -> torch.Tensor:
    return torch.zeros((), dtype=dtype)


def gan_step(state: TrainState, natural: torch.Tensor,
             styles: torch.Tensor | None, log: MetricLog) -> dict[str, float]:
    """One alternating D-then-G update. styles=None runs the stage-1 form."""
    cfg = state.cfg
    batch = cfg["train.batch_size"]
    n_samples = cfg["model.n_samples"]
    size = cfg["model.image_size"]
    n = state.generator.n_sites
    stage2 = styles is not None
    weights = LossWeights(
        cfg["train.lambda1"],
        cfg["train.lambda2"] if stage2 else 0.0,
        cfg["train.lambda3"] if stage2 else 0.0,
        cfg["train.r1_lambda"])

    rng = state.rng
    x_real = _sample_batch(natural, batch, rng)
    z_real = torch.randn(batch, state.generator.identity_dim, generator=rng)
    pitch_r, yaw_r = sample_poses(batch, cfg.pitch_range, cfg.yaw_range, rng)
    pose_real = torch.stack([pitch_r, yaw_r], dim=-1)
    fake_real = state.generator.synthesize(
        z_real, None, n, pitch_r, yaw_r, resolution=size,
        n_samples=n_samples, generator=rng)

    x_style = x_neg = z_style = z_neg = fake_style = pose_style = None
    if stage2:
        x_style = _sample_batch(styles, batch, rng)
        z_style = state.encoder(x_style)
        if not cfg["train.finetune_encoder"]:
            z_style = z_style.detach()
        z_id = torch.randn(batch, state.generator.identity_dim, generator=rng)
        pitch_s, yaw_s = sample_poses(batch, cfg.pitch_range, cfg.yaw_range, rng)
        pose_style = torch.stack([pitch_s, yaw_s], dim=-1)
        fake_style = state.generator.synthesize(
            z_id, z_style, 0, pitch_s, yaw_s, resolution=size,
            n_samples=n_samples, generator=rng)
        z_neg = state.queue.drain()
        if z_neg is not None:
            z_id_neg = torch.randn(z_neg.shape[0], state.generator.identity_dim,
                                   generator=rng)
            pitch_n, yaw_n = sample_poses(z_neg.shape[0], cfg.pitch_range,
                                          cfg.yaw_range, rng)
            x_neg = state.generator.synthesize(
                z_id_neg, z_neg, 0, pitch_n, yaw_n, resolution=size,
                n_samples=n_samples, generator=rng)
        state.queue.push(z_style)

    def loss_parts(for_generator: bool) -> LossParts:
        detach = (lambda t: t) if for_generator else (lambda t: t.detach())
        out_fake_r = state.d_real(detach(fake_real))
        real_logits = state.d_real(x_real).logit
        real_adv = adversarial_terms(out_fake_r.logit, real_logits.detach()
                                     if for_generator else real_logits)
        real_pose = pose_consistency_loss(out_fake_r.predicted_pose, pose_real)
        real_r1 = _zero()
        style_adv = style_pose = style_r1 = cond_adv = _zero()
        if not for_generator:
            x_req = x_real.detach().requires_grad_(True)
            real_r1 = r1_penalty(lambda imgs: state.d_real(imgs).logit, x_req,
                                 cfg["train.r1_lambda"])
        if stage2:
            out_fake_s = state.d_style(detach(fake_style))
            style_logits = state.d_style(x_style).logit
            style_adv = adversarial_terms(out_fake_s.logit, style_logits.detach()
                                          if for_generator else style_logits)
            style_pose = pose_consistency_loss(out_fake_s.predicted_pose, pose_style)
            if not for_generator:
                xs_req = x_style.detach().requires_grad_(True)
                style_r1 = r1_penalty(lambda imgs: state.d_style(imgs).logit, xs_req,
                                      cfg["train.r1_lambda"])
            pos = softminus(-state.d_cond.conditioned_logit(x_style, z_style.detach())).mean()
            cond_adv = pos
            if x_neg is not None:
                neg = softminus(state.d_cond.conditioned_logit(detach(x_neg), z_neg)).mean()
                cond_adv = cond_adv + neg
        return LossParts(real_adv, real_pose, real_r1,
                         style_adv, style_pose, style_r1, cond_adv)

    # discriminator update
    _zero_grads(state)
    d_loss = total_loss(loss_parts(for_generator=False), weights)["d_loss"]
    d_loss.backward()
    state.opt_d.step()

    # generator update
    _zero_grads(state)
    g_loss = total_loss(loss_parts(for_generator=True), weights)["g_loss"]
    g_loss.backward()
    state.opt_g.step()
    if stage2 and cfg["train.finetune_encoder"]:
        state.opt_enc.step()
    _zero_grads(state)
    _assert_finite_parameters(state)

    scalars = {"d_loss": float(d_loss.item()), "g_loss": float(g_loss.item())}
    if state.step % cfg["train.log_every"] == 0:
        for name, value in scalars.items():
            log.log(state.step, name, value)
    return scalars


def contrastive_step(state: TrainState, styles: torch.Tensor,
                     log: MetricLog) -> float:
    """One NT-Xent update of the style encoder on style/augmented pairs."""
    cfg = state.cfg
    n_pairs = cfg["train.contrastive_batch"]
    rng = state.rng
    idx = torch.randint(styles.shape[0], (n_pairs,), generator=rng)
    seeds = torch.randint(0, 2 ** 31 - 1, (n_pairs,), generator=rng)
    views = []
    for i in range(n_pairs):
        img = styles[idx[i]]
        views.append(img)
        views.append(augment(img, int(seeds[i])))
    batch = torch.stack(views)
    reps = state.encoder.represent(batch)
    loss = nt_xent_loss(reps, interleaved_pairs(n_pairs), cfg["encoder.tau"])
    state.opt_enc.zero_grad(set_to_none=True)
    loss.backward()
    state.opt_enc.step()
    state.opt_enc.zero_grad(set_to_none=True)
    value = float(loss.item())
    log.log(state.step, "contrastive", value)
    return value


# ---------------------------------------------------------------------------
# stage drivers

def train(stage: int, cfg: Config, datasets: dict[str, torch.Tensor],
          out_dir: str | Path, resume_from: str | Path | None = None,
          state: TrainState | None = None) -> list[Path]:
    """Run one training stage; returns the emitted checkpoint paths.

    Stage 2 requires resume_from (a stage-1 or stage-2 checkpoint). Passing
    a prebuilt state skips construction (used by tests).
    """
    if stage not in (1, 2):
        raise ValueError("stage must be 1 or 2")
    if cfg["train.deterministic"]:
        torch.use_deterministic_algorithms(True)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if state is None:
        state = build_train_state(cfg)

    natural = datasets.get("natural")
    if natural is None:
        raise ConfigError("datasets must include a 'natural' image tensor")
    styles = datasets.get("style")
    if stage == 2 and styles is None:
        raise ConfigError("stage 2 needs a 'style' image tensor")

    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if stage == 2 and ckpt.stage == 1:
            restore_train_state(state, ckpt, full=False)  # fresh stage-2 clock
            state.stage = 2
            state.step = 0
        elif ckpt.stage == stage:
            restore_train_state(state, ckpt, full=True)
        else:
            raise ConfigError(
                f"cannot start stage {stage} from a stage-{ckpt.stage} checkpoint")
    elif stage == 2:
        raise ConfigError("stage 2 requires a stage-1 checkpoint (resume_from)")
    state.stage = stage

    contrastive_steps = cfg["train.contrastive_steps"] if stage == 2 else 0
    gan_steps = cfg["train.stage1_steps"] if stage == 1 else cfg["train.stage2_steps"]
    total_steps = contrastive_steps + gan_steps
    log = MetricLog(out_dir / f"metrics_stage{stage}.jsonl")
    every = cfg["train.checkpoint_every"]
    paths: list[Path] = []

    while state.step < total_steps:
        if state.step < contrastive_steps:
            contrastive_step(state, styles, log)
        else:
            gan_step(state, natural, styles if stage == 2 else None, log)
        state.step += 1
        if state.step % every == 0 and state.step < total_steps:
            path = out_dir / f"stage{stage}_step{state.step:06d}.ckpt"
            save_train_checkpoint(state, path)
            paths.append(path)

    final = out_dir / f"stage{stage}_final.ckpt"
    save_train_checkpoint(state, final)
    paths.append(final)
    return paths


def load_generator_from_checkpoint(path: str | Path) -> tuple[StyleFieldGenerator, StyleEncoder, Config]:
    """Rebuild the generator + encoder pair a checkpoint was trained with."""
    ckpt = load_checkpoint(path)
    cfg = Config(ckpt.config)
    generator = build_generator(cfg)
    generator.load_state_dict(ckpt.subset("model.generator"))
    encoder = StyleEncoder(
        extractor_width=cfg["encoder.extractor_width"],
        extractor_seed=cfg["encoder.extractor_seed"],
        code_dim=cfg["model.style_dim"],
        projection_hidden=cfg["encoder.projection_hidden"],
        representation_dim=cfg["encoder.representation_dim"])
    encoder.load_state_dict(ckpt.subset("model.encoder"))
    generator.eval()
    encoder.eval()
    return generator, encoder, cfg
