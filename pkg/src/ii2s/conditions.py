"""Condition functions f for conditional embedding: identity, grayscale, mask, downsample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvalidInputError
from .resample import downsample_bicubic

LUMA = (0.299, 0.587, 0.114)
RIGHT_HALF = (0.0, 0.5, 1.0, 1.0)


def _luma(img):
    if isinstance(img, torch.Tensor):
        coeffs = torch.tensor(LUMA, dtype=img.dtype, device=img.device).view(3, 1, 1)
        y = (img * coeffs).sum(dim=-3, keepdim=True)
        return y.expand_as(img).clone()
    img = np.asarray(img, dtype=np.float64)
    y = np.tensordot(np.asarray(LUMA), img, axes=([0], [-3]))
    return np.repeat(np.expand_dims(y, -3), 3, axis=-3)


def condition_grayscale(img):
    """Replicate luminance 0.299R + 0.587G + 0.114B to all three channels."""
    if img.shape[-3] != 3:
        raise InvalidInputError("grayscale condition expects RGB images")
    return _luma(img)


def region_mask(height: int, width: int, region=RIGHT_HALF) -> np.ndarray:
    """1 where pixels are kept, 0 inside the erased ``region`` = (top, left, bottom, right) fractions."""
    top, left, bottom, right = region
    if not (0 <= top <= bottom <= 1 and 0 <= left <= right <= 1):
        raise InvalidInputError(f"region {region} is not within the unit square")
    mask = np.ones((height, width))
    r0, r1 = int(round(top * height)), int(round(bottom * height))
    c0, c1 = int(round(left * width)), int(round(right * width))
    mask[r0:r1, c0:c1] = 0.0
    return mask


def condition_mask(img, region=RIGHT_HALF):
    """Zero out the pixels inside ``region``."""
    mask = region_mask(img.shape[-2], img.shape[-1], region)
    if isinstance(img, torch.Tensor):
        return img * torch.as_tensor(mask, dtype=img.dtype, device=img.device)
    return np.asarray(img, dtype=np.float64) * mask


@dataclass(frozen=True)
class ConditionFn:
    kind: str = "identity"
    size: int | None = None
    region: tuple[float, float, float, float] = RIGHT_HALF

    def __post_init__(self):
        if self.kind not in ("identity", "grayscale", "mask", "downsample"):
            raise InvalidInputError(f"unknown condition kind {self.kind!r}")
        if self.kind == "downsample" and not self.size:
            raise InvalidInputError("downsample condition needs a target size")

    def __call__(self, img):
        if self.kind == "identity":
            return img
        if self.kind == "grayscale":
            return condition_grayscale(img)
        if self.kind == "mask":
            return condition_mask(img, self.region)
        return downsample_bicubic(img, self.size)

    def mask(self, height: int, width: int) -> np.ndarray | None:
        return region_mask(height, width, self.region) if self.kind == "mask" else None

    @classmethod
    def parse(cls, text: str | None) -> "ConditionFn":
        """CLI syntax: ``none``, ``gray``, ``mask:right-half``, ``mask:t,l,b,r``, ``sr:<size>``."""
        if text in (None, "", "none", "identity"):
            return cls()
        if text in ("gray", "grayscale"):
            return cls("grayscale")
        kind, _, arg = text.partition(":")
        if kind == "mask":
            if arg in ("", "right-half"):
                return cls("mask")
            if arg == "left-half":
                return cls("mask", region=(0.0, 0.0, 1.0, 0.5))
            parts = tuple(float(p) for p in arg.split(","))
            if len(parts) != 4:
                raise InvalidInputError("mask region needs four fractions: top,left,bottom,right")
            return cls("mask", region=parts)
        if kind in ("sr", "downsample"):
            return cls("downsample", size=int(arg))
        raise InvalidInputError(f"cannot parse condition {text!r}")

    def describe(self) -> str:
        if self.kind == "identity":
            return "none"
        if self.kind == "grayscale":
            return "gray"
        if self.kind == "mask":
            return "mask:" + ",".join(f"{r:g}" for r in self.region)
        return f"sr:{self.size}"


IDENTITY = ConditionFn()
