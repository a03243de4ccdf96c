"""Distribution metrics and the perceptual-diversity protocol.

All estimators work on caller-supplied feature/probability arrays; the
feature extractor feeding them is pluggable (the desk default elsewhere in
the package is a small fixed random CNN, so absolute values are not
comparable across extractors; only estimator behavior is guaranteed).
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
import torch



@dataclass
class MetricReport:
    name: str
    value: float
    n_samples: int
    config_hash: str

    def as_record(self) -> dict:
        return {"name": self.name, "value": self.value,
                "n_samples": self.n_samples, "config_hash": self.config_hash}


def _sqrtm_trace_of_product(cov_a: np.ndarray, cov_b: np.ndarray,
                            eps: float = 1e-6) -> float:
    """tr((cov_a cov_b)^(1/2)) via eigendecomposition of the symmetrized product."""
    vals_a, vecs_a = np.linalg.eigh(cov_a)
    clipped = np.clip(vals_a, 0.0, None)
    if (vals_a < -eps).any():
        warnings.warn("covariance not PSD; negative eigenvalues clamped")
    root_a = (vecs_a * np.sqrt(clipped)) @ vecs_a.T
    inner = root_a @ cov_b @ root_a
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    if (vals < -eps).any():
        warnings.warn("product matrix not PSD; negative eigenvalues clamped")
    return float(np.sqrt(np.clip(vals, 0.0, None)).sum())


def fid(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets [N, d]."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False)
    cov_b = np.cov(b, rowvar=False)
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b)
                 - 2.0 * _sqrtm_trace_of_product(cov_a, cov_b))


def _poly_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def kid(features_a: np.ndarray, features_b: np.ndarray,
        block_size: int = 1000) -> float:
    """Unbiased MMD^2 (U-statistic) with the cubic polynomial kernel.

    Diagonals are excluded from all three terms, so identical feature sets
    give exactly zero; values are averaged over consecutive blocks. The
    cross-diagonal exclusion makes the estimate depend on row pairing at
    O(1/m); callers permuting samples should permute both sets together.
    """
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    n = min(a.shape[0], b.shape[0])
    if block_size > n:
        raise ValueError(f"block size {block_size} exceeds sample count {n}")
    n_blocks = n // block_size
    values = []
    for i in range(n_blocks):
        xa = a[i * block_size:(i + 1) * block_size]
        xb = b[i * block_size:(i + 1) * block_size]
        m = block_size
        k_aa = _poly_kernel(xa, xa)
        k_bb = _poly_kernel(xb, xb)
        k_ab = _poly_kernel(xa, xb)
        scale = 1.0 / (m * (m - 1))
        term_a = (k_aa.sum() - np.trace(k_aa)) * scale
        term_b = (k_bb.sum() - np.trace(k_bb)) * scale
        term_ab = 2.0 * (k_ab.sum() - np.trace(k_ab)) * scale
        values.append(term_a + term_b - term_ab)
    return float(np.mean(values))


def inception_score(class_probs: np.ndarray) -> float:
    """exp of the mean KL between per-sample class posteriors and the marginal."""
    p = np.asarray(class_probs, dtype=np.float64)
    row_sums = p.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-6):
        raise ValueError("class_probs rows must each sum to 1")
    marginal = p.mean(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(p > 0, np.log(p) - np.log(marginal), 0.0)
    kl = (p * log_ratio).sum(axis=1)
    return float(np.exp(kl.mean()))


class ProxyPerceptualDistance:
    """Fixed random-CNN feature L2 distance; a hermetic LPIPS stand-in."""

    def __init__(self, seed: int = 11, width: int = 16):
        from .encoder import RandomFeatureExtractor

        self.extractor = RandomFeatureExtractor(width=width, seed=seed)

    def __call__(self, img_a: torch.Tensor, img_b: torch.Tensor) -> float:
        with torch.no_grad():
            feats_a = self.extractor(img_a[None] if img_a.dim() == 3 else img_a)
            feats_b = self.extractor(img_b[None] if img_b.dim() == 3 else img_b)
        total = 0.0
        for fa, fb in zip(feats_a, feats_b):
            total += float((fa - fb).pow(2).mean().item())
        return total


def lpips_diversity(sample_image, n_identities: int, n_styles: int,
                    distance) -> float:
    """Mean pairwise perceptual distance across styles, averaged over identities.

    sample_image(identity_index, style_index) must return one image tensor;
    for each identity the mean runs over all C(n_styles, 2) unordered pairs.
    """
    if n_styles < 2:
        raise ValueError("need at least 2 styles for pairwise diversity")
    per_identity = []
    for identity in range(n_identities):
        images = [sample_image(identity, style) for style in range(n_styles)]
        dists = [distance(images[i], images[j])
                 for i, j in itertools.combinations(range(n_styles), 2)]
        per_identity.append(float(np.mean(dists)))
    return float(np.mean(per_identity))
