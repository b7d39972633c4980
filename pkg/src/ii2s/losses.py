"""Reconstruction loss assembly for inversion: perceptual + pixel L2 + λ‖v‖²."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvalidInputError
from .perceptual import FeatureExtractor, perceptual_distance
from .resample import downsample_bicubic, downsample_lanczos


@dataclass(frozen=True)
class LossWeights:
    w_perceptual: float = 1.0
    w_pixel: float = 1.0
    lam: float = 0.005

    def __post_init__(self):
        if min(self.w_perceptual, self.w_pixel, self.lam) < 0:
            raise InvalidInputError("loss weights must be nonnegative")
        if self.w_perceptual == 0 and self.w_pixel == 0:
            raise InvalidInputError("at least one reconstruction weight must be positive")


def pixel_l2(a, b):
    """Mean squared difference over pixels and channels (numpy or torch)."""
    if tuple(a.shape) != tuple(b.shape):
        raise InvalidInputError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    if isinstance(a, torch.Tensor):
        return torch.mean((a - b) ** 2)
    return float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))


def to_unit_range(img):
    """Generator range [−1, 1] → [0, 1]."""
    return (img + 1) * 0.5


def prepare_reference(ref: torch.Tensor, size: int | None) -> torch.Tensor:
    """Lanczos-downsample the reference once; it never enters the gradient."""
    ref = ref.detach()
    if size is None or ref.shape[-1] <= size:
        return ref
    return downsample_lanczos(ref, size)


def prepare_generated(gen: torch.Tensor, size: int | None) -> torch.Tensor:
    if size is None or gen.shape[-1] <= size:
        return gen
    return downsample_bicubic(gen, size)


def total_loss_per_image(ref, gen, v, weights: LossWeights, extractor: FeatureExtractor):
    """Per-image objective for a batch: ``gen``/``ref`` are (B, 3, h, w), ``v`` is (B, L, D)."""
    zero = gen.new_zeros(gen.shape[0])
    perc = (
        weights.w_perceptual * perceptual_distance(ref, gen, extractor, reduction="none")
        if weights.w_perceptual
        else zero
    )
    pix = weights.w_pixel * torch.mean((ref - gen) ** 2, dim=(1, 2, 3)) if weights.w_pixel else zero
    v_sq = torch.sum(v**2, dim=tuple(range(1, v.ndim)))
    reg = weights.lam * v_sq
    total = perc + pix + reg
    return total, {"perceptual": perc, "pixel": pix, "regularizer": reg, "v_norm_sq": v_sq}


def total_loss(ref, gen, v, weights: LossWeights, extractor: FeatureExtractor):
    """Objective ``w_p·perceptual + w_pix·L2 + λ‖v‖²`` for one prepared image pair in [0, 1].

    ``ref``/``gen`` are (3, h, w) or (1, 3, h, w) tensors; ``v`` is a P_N+
    code or its values. Returns the total and a dict of its weighted terms
    (which sum to the total) plus the raw ``v_norm_sq``.
    """
    if not isinstance(v, torch.Tensor):
        v = torch.as_tensor(np.array(getattr(v, "values", v)), dtype=gen.dtype)
    if gen.ndim == 3:
        ref, gen = ref[None], gen[None]
    if tuple(ref.shape) != tuple(gen.shape):
        raise InvalidInputError(f"image shapes differ: {tuple(ref.shape)} vs {tuple(gen.shape)}")
    total, comps = total_loss_per_image(ref, gen, v[None], weights, extractor)
    return total[0], {k: t[0] for k, t in comps.items()}
