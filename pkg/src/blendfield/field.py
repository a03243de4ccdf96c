"""Conditional radiance field: FiLM-modulated sinusoidal backbone with dense
per-layer density/feature heads, plus discrete volume rendering of features.

The backbone is a stack of k sinusoidal layers. Layer i is modulated by
(gamma_i, beta_i) projected from row i of the fused backbone latents. Density
sums the per-layer density heads of layers 0..k-2 (the view-conditioned last
layer is excluded, so density never depends on the viewing direction);
features sum the feature heads of all k layers.
"""

import math

import torch
import torch.nn as nn

from .errors import ConfigError, NumericError


def film_layer(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor,
               weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """sin(gamma * (x @ weight.T + bias) + beta); broadcasts over leading dims."""
    if weight.shape[1] != x.shape[-1]:
        raise ConfigError(
            f"film_layer: weight expects input dim {weight.shape[1]}, got {x.shape[-1]}")
    if gamma.shape[-1] != weight.shape[0] or beta.shape[-1] != weight.shape[0]:
        raise ConfigError("film_layer: gamma/beta must match the layer output dim")
    return torch.sin(gamma * (x @ weight.t() + bias) + beta)


def siren_init_(linear: nn.Linear, is_first: bool, gamma0: float) -> None:
    """Frequency-scaled uniform init keeping sin activations well-spread."""
    fan_in = linear.weight.shape[1]
    with torch.no_grad():
        if is_first:
            bound = 1.0 / fan_in
        else:
            bound = math.sqrt(6.0 / fan_in) / gamma0
        linear.weight.uniform_(-bound, bound)
        linear.bias.uniform_(-bound, bound)


class FilmSirenField(nn.Module):
    """FiLM-conditioned sinusoidal field with dense skip prediction heads.

    forward() maps points [B, P, 3] (+ per-point view dirs) and backbone
    latents [B, k, w_dim] to (sigma [B, P], features [B, P, M_f]).
    """

    def __init__(self, n_layers: int = 8, hidden: int = 128, w_dim: int = 256,
                 feature_channels: int = 64, gamma_init: float = 15.0,
                 feature_clamp: float = 10.0):
        super().__init__()
        if n_layers < 2:
            raise ConfigError("field needs at least 2 layers")
        self.n_layers = n_layers
        self.hidden = hidden
        self.feature_channels = feature_channels
        self.gamma_init = gamma_init
        self.feature_clamp = feature_clamp

        self.layers = nn.ModuleList()
        for i in range(n_layers):
            in_dim = 3 if i == 0 else hidden
            if i == n_layers - 1:
                in_dim += 3  # viewing direction enters the last layer only
            layer = nn.Linear(in_dim, hidden)
            siren_init_(layer, is_first=(i == 0), gamma0=gamma_init)
            self.layers.append(layer)

        # per-layer affine heads projecting a latent row to modulation coeffs
        self.gamma_heads = nn.ModuleList()
        self.beta_heads = nn.ModuleList()
        for _ in range(n_layers):
            gamma_head = nn.Linear(w_dim, hidden)
            beta_head = nn.Linear(w_dim, hidden)
            nn.init.normal_(gamma_head.weight, std=0.25 / math.sqrt(w_dim))
            nn.init.constant_(gamma_head.bias, gamma_init)
            nn.init.normal_(beta_head.weight, std=0.25 / math.sqrt(w_dim))
            nn.init.zeros_(beta_head.bias)
            self.gamma_heads.append(gamma_head)
            self.beta_heads.append(beta_head)

        # dense skips: density heads for layers 0..k-2, feature heads for all
        self.density_heads = nn.ModuleList(
            nn.Linear(hidden, 1) for _ in range(n_layers - 1))
        self.feature_heads = nn.ModuleList(
            nn.Linear(hidden, feature_channels) for _ in range(n_layers))

    def forward(self, points: torch.Tensor, view_dirs: torch.Tensor,
                w_backbone: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if w_backbone.shape[-2] != self.n_layers:
            raise ConfigError(
                f"expected {self.n_layers} backbone latent rows, got {w_backbone.shape[-2]}")
        squeeze = points.dim() == 2
        if squeeze:
            points = points[None]
            view_dirs = view_dirs[None]
            w_backbone = w_backbone[None] if w_backbone.dim() == 2 else w_backbone

        sigma_sum = None
        feature_sum = None
        x = points
        for i, layer in enumerate(self.layers):
            gamma = self.gamma_heads[i](w_backbone[:, i])[:, None, :]  # [B, 1, H]
            beta = self.beta_heads[i](w_backbone[:, i])[:, None, :]
            if i == self.n_layers - 1:
                x = torch.cat([x, view_dirs], dim=-1)
            x = film_layer(x, gamma, beta, layer.weight, layer.bias)
            if not torch.isfinite(x).all():
                raise NumericError("non-finite activation in radiance field", layer=i)
            if i < self.n_layers - 1:
                term = self.density_heads[i](x).squeeze(-1)
                sigma_sum = term if sigma_sum is None else sigma_sum + term
            term = self.feature_heads[i](x)
            feature_sum = term if feature_sum is None else feature_sum + term

        sigma = nn.functional.softplus(sigma_sum)
        features = feature_sum.clamp(-self.feature_clamp, self.feature_clamp)
        if squeeze:
            return sigma[0], features[0]
        return sigma, features


def volume_render(sigma: torch.Tensor, features: torch.Tensor,
                  depths: torch.Tensor, t_far: float) -> torch.Tensor:
    """Composite per-sample features along each ray.

    sigma [..., N], features [..., N, M], depths [..., N] strictly increasing.
    alpha_j = 1 - exp(-sigma_j * delta_j) with delta_j the gap to the next
    sample (the last gap closes the interval at t_far). Returns [..., M].
    """
    if (sigma < 0).any():
        raise ValueError("volume_render requires nonnegative density")
    gaps = depths[..., 1:] - depths[..., :-1]
    last = t_far - depths[..., -1:]
    deltas = torch.cat([gaps, last], dim=-1)
    alpha = 1.0 - torch.exp(-sigma * deltas)
    # exclusive cumulative transmittance: prod_{m<j} (1 - alpha_m)
    one_minus = 1.0 - alpha
    trans = torch.cumprod(
        torch.cat([torch.ones_like(one_minus[..., :1]), one_minus[..., :-1]], dim=-1),
        dim=-1,
    )
    weights = alpha * trans
    return (weights[..., None] * features).sum(dim=-2)


def compositing_weights(sigma: torch.Tensor, depths: torch.Tensor,
                        t_far: float) -> torch.Tensor:
    """The per-sample weights used by volume_render (exposed for inspection)."""
    gaps = depths[..., 1:] - depths[..., :-1]
    deltas = torch.cat([gaps, t_far - depths[..., -1:]], dim=-1)
    alpha = 1.0 - torch.exp(-sigma * deltas)
    one_minus = 1.0 - alpha
    trans = torch.cumprod(
        torch.cat([torch.ones_like(one_minus[..., :1]), one_minus[..., :-1]], dim=-1),
        dim=-1,
    )
    return alpha * trans
