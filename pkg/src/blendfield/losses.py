"""Adversarial objectives, R1 penalty, pose consistency, and the style queue.

Each branch loss is the discriminator's minimization objective

    L = E[ f(D(fake)) ] + E[ f(-D(real)) ]  (+ R1 on real samples)

with f(x) = -log(1 + exp(-x)). The generator minimizes the negated no-R1
form of the weighted total, L_G = -L_D_no_r1, so the two sides are exact
negatives of each other apart from the penalty.
"""

from collections import deque
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import ConfigError


def softminus(x: torch.Tensor) -> torch.Tensor:
    """-log(1 + exp(-x)), computed without overflow for large |x|."""
    return -F.softplus(-x)


def adversarial_terms(fake_logits: torch.Tensor, real_logits: torch.Tensor) -> torch.Tensor:
    """mean f(fake) + mean f(-real); the no-penalty branch objective."""
    return softminus(fake_logits).mean() + softminus(-real_logits).mean()


def r1_penalty(disc_logit_fn, real_images: torch.Tensor, r1_lambda: float) -> torch.Tensor:
    """r1_lambda * mean_batch ||d logit / d pixels||^2 at the real samples."""
    if not real_images.requires_grad:
        raise ValueError("r1_penalty needs real images with requires_grad=True")
    logits = disc_logit_fn(real_images)
    (grads,) = torch.autograd.grad(
        outputs=logits.sum(), inputs=real_images, create_graph=True)
    return r1_lambda * grads.reshape(grads.shape[0], -1).pow(2).sum(dim=1).mean()


def pose_consistency_loss(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared L2 distance between predicted and sampled (pitch, yaw)."""
    return (predicted - target).pow(2).sum(dim=-1).mean()


@dataclass
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    r1_lambda: float = 10.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "r1_lambda"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


@dataclass
class LossParts:
    """Scalar pieces of one training step, before weighting.

    r1 terms arrive already scaled by r1_lambda; zeros stand in for branches
    that are disabled (stage 1) or skipped (queue warm-up).
    """

    real_adv: torch.Tensor
    real_pose: torch.Tensor
    real_r1: torch.Tensor
    style_adv: torch.Tensor
    style_pose: torch.Tensor
    style_r1: torch.Tensor
    cond_adv: torch.Tensor


def total_loss(parts: LossParts, weights: LossWeights) -> dict[str, torch.Tensor]:
    """Weighted totals: the discriminator objective and its negated no-R1 form."""
    no_r1 = (
        weights.lambda1 * (parts.real_adv + parts.real_pose)
        + weights.lambda2 * (parts.style_adv + parts.style_pose)
        + weights.lambda3 * parts.cond_adv
    )
    d_loss = no_r1 + weights.lambda1 * parts.real_r1 + weights.lambda2 * parts.style_r1
    return {"d_loss": d_loss, "g_loss": -no_r1}


class EmbeddingQueue:
    """FIFO of style codes from the previous batch, used as negatives.

    Capacity equals the batch size; drain() hands out everything that was
    pushed the batch before.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.capacity = capacity
        self._codes: deque[torch.Tensor] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._codes)

    def push(self, codes: torch.Tensor) -> None:
        for row in codes.detach():
            self._codes.append(row.clone())

    def drain(self) -> torch.Tensor | None:
        """Pop every stored code; None while warming up."""
        if not self._codes:
            return None
        batch = torch.stack(list(self._codes))
        self._codes.clear()
        return batch

    def state(self) -> torch.Tensor:
        """Snapshot of queue contents for checkpointing ([m, dim] or empty)."""
        if not self._codes:
            return torch.zeros(0, 0)
        return torch.stack(list(self._codes))

    def load_state(self, codes: torch.Tensor) -> None:
        self._codes.clear()
        if codes.numel():
            self.push(codes)
