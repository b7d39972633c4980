"""Separable antialiased resampling with Catmull-Rom bicubic and Lanczos-3 kernels.

Each output pixel ``i`` sits at input coordinate ``c = (i + 0.5)·s`` with
``s = in/out``. Its weights are ``K((j + 0.5 − c)/max(s, 1))`` over input
pixels ``j``, renormalized to sum to one (so edges and non-integer factors
keep constants constant). Kernels, with ``t = |x|``:

* Catmull-Rom (a = −0.5): ``(a+2)t³ − (a+3)t² + 1`` for t ≤ 1,
  ``a t³ − 5a t² + 8a t − 4a`` for 1 < t < 2, else 0.
* Lanczos-3: ``sinc(t)·sinc(t/3)`` for t < 3, else 0.

Both operators are linear in pixel values; the bicubic one is used where
gradients are needed.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import torch

from .errors import InvalidInputError

CATMULL_ROM_A = -0.5


def catmull_rom(x):
    a = CATMULL_ROM_A
    t = np.abs(x)
    near = (a + 2) * t**3 - (a + 3) * t**2 + 1
    far = a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def lanczos3(x):
    t = np.abs(x)
    return np.where(t < 3, np.sinc(t) * np.sinc(t / 3), 0.0)


KERNELS = {"bicubic": (catmull_rom, 2.0), "lanczos": (lanczos3, 3.0)}


@lru_cache(maxsize=64)
def resample_matrix(in_size: int, out_size: int, kind: str) -> np.ndarray:
    """(out_size, in_size) row-stochastic resampling matrix."""
    if out_size > in_size:
        raise InvalidInputError(f"upsampling from {in_size} to {out_size} is not supported")
    if out_size < 1:
        raise InvalidInputError("output size must be positive")
    kernel, _ = KERNELS[kind]
    scale = in_size / out_size
    width = max(scale, 1.0)
    centers = (np.arange(out_size) + 0.5) * scale
    offsets = (np.arange(in_size)[None, :] + 0.5 - centers[:, None]) / width
    w = kernel(offsets)
    w /= w.sum(axis=1, keepdims=True)
    w.setflags(write=False)
    return w


def _resample(img, size: int, kind: str):
    h, w = img.shape[-2:]
    rows = resample_matrix(h, size, kind)
    cols = resample_matrix(w, size, kind)
    if isinstance(img, torch.Tensor):
        rows = torch.tensor(rows, dtype=img.dtype, device=img.device)
        cols = torch.tensor(cols, dtype=img.dtype, device=img.device)
        return rows @ img @ cols.T
    return rows @ np.asarray(img, dtype=np.float64) @ cols.T


def downsample_bicubic(img, size: int):
    """Differentiable bicubic downsampling of (..., H, W) arrays or tensors to size × size."""
    return _resample(img, size, "bicubic")


def downsample_lanczos(img, size: int):
    """Lanczos-3 downsampling; only ever applied to fixed reference images."""
    if isinstance(img, torch.Tensor):
        img = img.detach()
    return _resample(img, size, "lanczos")
