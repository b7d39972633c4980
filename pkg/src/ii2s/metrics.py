"""Reconstruction metrics (SSIM, RMSE, PSNR, perceptual distances) and Fréchet distance."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy.signal import convolve2d

from .conditions import LUMA
from .errors import InvalidInputError
from .perceptual import FeatureExtractor, perceptual_distance

PSNR_IDENTICAL = math.inf
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def rmse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(a, b) -> float:
    """``20·log10(1/rmse)`` for images in [0, 1]; identical images give ``inf``."""
    e = rmse(a, b)
    return PSNR_IDENTICAL if e == 0 else float(-20.0 * np.log10(e))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def to_gray(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[0] == 3:
        return np.tensordot(np.asarray(LUMA), img, axes=([0], [0]))
    if img.ndim == 3 and img.shape[0] == 1:
        return img[0]
    raise InvalidInputError(f"expected (3, H, W), (1, H, W) or (H, W) image, got {img.shape}")


def ssim(a, b, window: int = 11, sigma: float = 1.5) -> float:
    """Mean local SSIM on the luminance channel, computed over fully covered windows."""
    a, b = _pair(a, b)
    x, y = to_gray(a), to_gray(b)
    if min(x.shape) < window:
        raise InvalidInputError(f"images of size {x.shape} are smaller than the {window}×{window} SSIM window")
    w = gaussian_window(window, sigma)

    def blur(img):
        return convolve2d(img, w, mode="valid")

    mx, my = blur(x), blur(y)
    sxx = blur(x * x) - mx * mx
    syy = blur(y * y) - my * my
    sxy = blur(x * y) - mx * my
    num = (2 * mx * my + SSIM_C1) * (2 * sxy + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (sxx + syy + SSIM_C2)
    return float(np.clip(np.mean(num / den), -1.0, 1.0))


@dataclass(frozen=True)
class GaussianMoments:
    """Mean, unbiased covariance and sample count of a feature cloud."""

    mean: np.ndarray
    covariance: np.ndarray
    n: int

    def __post_init__(self):
        mu = np.array(self.mean, dtype=np.float64)
        cov = np.array(self.covariance, dtype=np.float64)
        if mu.ndim != 1 or cov.shape != (mu.size, mu.size):
            raise InvalidInputError(f"mean {mu.shape} and covariance {cov.shape} are inconsistent")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def from_samples(cls, x) -> "GaussianMoments":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise InvalidInputError("need a nonempty (n, d) feature matrix")
        # Sorting rows first makes the sums independent of input order.
        x = x[np.lexsort(x.T[::-1])]
        n = x.shape[0]
        mu = x.mean(axis=0)
        c = x - mu
        cov = c.T @ c / (n - 1) if n > 1 else np.zeros((x.shape[1], x.shape[1]))
        return cls(mu, cov, n)

    def merge(self, other: "GaussianMoments") -> "GaussianMoments":
        """Moments of the union of the two underlying samples."""
        if self.dim != other.dim:
            raise InvalidInputError(f"feature dimensions differ: {self.dim} vs {other.dim}")
        n = self.n + other.n
        delta = other.mean - self.mean
        mu = self.mean + delta * (other.n / n)
        scatter = (
            (self.n - 1) * self.covariance
            + (other.n - 1) * other.covariance
            + np.outer(delta, delta) * (self.n * other.n / n)
        )
        return GaussianMoments(mu, scatter / (n - 1), n)


def _sqrt_psd(s: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (s + s.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def fid(p: GaussianMoments, q: GaussianMoments) -> float:
    """Fréchet distance ``‖μp − μq‖² + tr(Σp + Σq − 2(ΣpΣq)^{1/2})``.

    The trace of ``(ΣpΣq)^{1/2}`` is taken from the symmetric PSD matrix
    ``Σp^{1/2} Σq Σp^{1/2}``, which has the same eigenvalues.
    """
    if p.dim != q.dim:
        raise InvalidInputError(f"feature dimensions differ: {p.dim} vs {q.dim}")
    root_p = _sqrt_psd(p.covariance)
    inner = root_p @ q.covariance @ root_p
    vals = np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.T)), 0.0, None)
    diff = p.mean - q.mean
    d = diff @ diff + np.trace(p.covariance) + np.trace(q.covariance) - 2.0 * np.sqrt(vals).sum()
    return float(max(d, 0.0))


def pooled_features(images, e: FeatureExtractor, batch_size: int = 64) -> np.ndarray:
    """Spatially averaged features of every stage, concatenated per image."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or images.shape[0] == 0:
        raise InvalidInputError("need a nonempty (N, 3, H, W) batch")
    dtype = next((p.dtype for p in e.parameters()), torch.float64)
    rows = []
    with torch.no_grad():
        for i in range(0, len(images), batch_size):
            x = torch.as_tensor(images[i : i + batch_size], dtype=dtype)
            feats = [f.mean(dim=(2, 3)) for f in e.features(x)]
            rows.append(torch.cat(feats, dim=1).to(torch.float64).numpy())
    return np.concatenate(rows)


def extract_features(images, e: FeatureExtractor) -> GaussianMoments:
    return GaussianMoments.from_samples(pooled_features(images, e))


@dataclass
class MetricReport:
    """Per-image reconstruction metrics with their means; FID is set-level."""

    ids: list[str]
    ssim: list[float]
    rmse: list[float]
    psnr: list[float]
    perceptual_vgg: list[float] | None = None
    perceptual_lpips: list[float] | None = None
    fid: float | None = None
    fid_samples: int | None = None
    extractors: dict = field(default_factory=dict)

    COLUMNS = ("ssim", "rmse", "psnr", "perceptual_vgg", "perceptual_lpips")

    def aggregates(self) -> dict:
        out = {}
        for name in self.COLUMNS:
            values = getattr(self, name)
            if values is not None:
                out[name] = float(np.mean(values))
        if self.fid is not None:
            out["fid"] = self.fid
        return out

    def to_dict(self) -> dict:
        def clean(x):
            return "inf" if isinstance(x, float) and math.isinf(x) else x

        per_image = []
        for i, image_id in enumerate(self.ids):
            row = {"id": image_id}
            for name in self.COLUMNS:
                values = getattr(self, name)
                if values is not None:
                    row[name] = clean(values[i])
            per_image.append(row)
        return {
            "aggregate": {k: clean(v) for k, v in self.aggregates().items()},
            "per_image": per_image,
            "fid_samples": self.fid_samples,
            "extractors": self.extractors,
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = self.to_dict()["per_image"]
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["id"])
            writer.writeheader()
            writer.writerows(rows)
        return path


def _perceptual_column(refs, gens, e: FeatureExtractor) -> list[float]:
    dtype = next((p.dtype for p in e.parameters()), torch.float64)
    with torch.no_grad():
        a = torch.as_tensor(refs, dtype=dtype)
        b = torch.as_tensor(gens, dtype=dtype)
        return perceptual_distance(a, b, e, reduction="none").to(torch.float64).tolist()


def evaluate(
    refs,
    gens,
    ids=None,
    vgg: FeatureExtractor | None = None,
    lpips: FeatureExtractor | None = None,
    fid_extractor: FeatureExtractor | None = None,
) -> MetricReport:
    """All reconstruction columns for paired (N, 3, H, W) batches in [0, 1]."""
    refs = np.asarray(refs, dtype=np.float64)
    gens = np.asarray(gens, dtype=np.float64)
    if refs.shape != gens.shape or refs.ndim != 4:
        raise InvalidInputError(f"expected matching (N, 3, H, W) batches, got {refs.shape} and {gens.shape}")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(refs))]
    report = MetricReport(
        ids=ids,
        ssim=[ssim(a, b) for a, b in zip(refs, gens)],
        rmse=[rmse(a, b) for a, b in zip(refs, gens)],
        psnr=[psnr(a, b) for a, b in zip(refs, gens)],
    )
    if vgg is not None:
        report.perceptual_vgg = _perceptual_column(refs, gens, vgg)
        report.extractors["vgg"] = type(vgg).__name__
    if lpips is not None:
        report.perceptual_lpips = _perceptual_column(refs, gens, lpips)
        report.extractors["lpips"] = type(lpips).__name__
    if fid_extractor is not None:
        report.fid = fid(extract_features(refs, fid_extractor), extract_features(gens, fid_extractor))
        report.fid_samples = len(refs)
        report.extractors["fid"] = type(fid_extractor).__name__
    return report
