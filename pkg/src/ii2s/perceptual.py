"""Pluggable feature extractors for perceptual distances.

An extractor maps an image batch in [0, 1] to a list of feature maps. The
distance is the LPIPS-style sum over layers of the channel-weighted mean
squared difference of features unit-normalized per spatial location. The
VGG-perceptual convention skips the normalization.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InvalidInputError


class FeatureExtractor(nn.Module):
    """Base class; subclasses fill ``layers`` and per-layer ``channel_weights``."""

    name = "base"

    def __init__(self, normalize: bool = True, min_size: int = 1):
        super().__init__()
        self.normalize = normalize
        self.min_size = min_size

    def features(self, x: torch.Tensor) -> list[torch.Tensor]:
        raise NotImplementedError

    def channel_weights(self) -> list[torch.Tensor | None]:
        return [None] * len(self.features_spec())

    def features_spec(self) -> list[int]:
        raise NotImplementedError

    def check_input(self, x: torch.Tensor):
        if x.ndim != 4 or x.shape[1] != 3:
            raise InvalidInputError(f"extractor expects (B, 3, H, W) images, got {tuple(x.shape)}")
        if min(x.shape[-2:]) < self.min_size:
            raise InvalidInputError(
                f"{self.name} extractor needs images of at least {self.min_size}px, got {tuple(x.shape[-2:])}"
            )


class IdentityExtractor(FeatureExtractor):
    """Raw pixels as the single feature layer."""

    name = "identity"

    def features(self, x):
        return [x]

    def features_spec(self):
        return [3]


class RandomConvExtractor(FeatureExtractor):
    """Fixed-seed random conv stack (conv3×3 → leaky ReLU → 2× average pool per stage)."""

    name = "random_conv"

    def __init__(self, widths=(16, 32, 32), seed: int = 0, normalize: bool = True, dtype=torch.float64):
        super().__init__(normalize=normalize, min_size=2 ** (len(widths) - 1))
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            convs, weights = [], []
            cin = 3
            for cout in widths:
                conv = nn.Conv2d(cin, cout, 3, padding=1, padding_mode="reflect")
                nn.init.normal_(conv.weight, std=(2.0 / (cin * 9)) ** 0.5)
                nn.init.zeros_(conv.bias)
                convs.append(conv)
                weights.append(torch.rand(cout) + 0.5)
                cin = cout
        self.convs = nn.ModuleList(convs)
        self._weights = [w.to(dtype) for w in weights]
        self._widths = list(widths)
        self.to(dtype).eval().requires_grad_(False)

    def features(self, x):
        # Shift to zero-centered input as LPIPS does.
        h = x * 2 - 1
        out = []
        for i, conv in enumerate(self.convs):
            if i:
                h = F.avg_pool2d(h, 2)
            h = F.leaky_relu(conv(h), 0.2)
            out.append(h)
        return out

    def channel_weights(self):
        return self._weights

    def features_spec(self):
        return self._widths


class LpipsExtractor(FeatureExtractor):
    """Adapter over the ``lpips`` package (optional dependency, full-scale runs only)."""

    name = "lpips"

    def __init__(self, net: str = "vgg"):
        super().__init__(normalize=True, min_size=16)
        try:
            import lpips
        except ImportError as exc:
            raise InvalidInputError("the 'lpips' package is required for the published perceptual weights") from exc
        self.model = lpips.LPIPS(net=net, verbose=False).eval().requires_grad_(False)

    def distance(self, a, b):
        return self.model(a.float(), b.float(), normalize=True).reshape(-1).to(a.dtype)


def _unit_normalize(f: torch.Tensor, eps: float = 1e-10) -> torch.Tensor:
    return f / torch.sqrt(torch.sum(f**2, dim=1, keepdim=True) + eps)


def perceptual_distance(
    a: torch.Tensor, b: torch.Tensor, extractor: FeatureExtractor, reduction: str = "mean"
) -> torch.Tensor:
    """Perceptual distance between two (B, 3, H, W) batches in [0, 1].

    ``reduction="none"`` returns one value per image.
    """
    if a.shape != b.shape:
        raise InvalidInputError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    if isinstance(extractor, LpipsExtractor):
        per_image = extractor.distance(a, b)
    else:
        extractor.check_input(a)
        per_image = a.new_zeros(a.shape[0])
        for fa, fb, w in zip(extractor.features(a), extractor.features(b), extractor.channel_weights()):
            if extractor.normalize:
                fa, fb = _unit_normalize(fa), _unit_normalize(fb)
            diff = (fa - fb) ** 2
            if w is not None:
                diff = diff * w.to(diff.dtype).view(1, -1, 1, 1)
            per_image = per_image + diff.sum(dim=1).mean(dim=(1, 2))
    return per_image if reduction == "none" else per_image.mean()


def make_extractor(name: str, seed: int = 0, dtype=torch.float64) -> FeatureExtractor:
    if name in ("random_conv", "toy"):
        return RandomConvExtractor(seed=seed, dtype=dtype)
    if name == "random_conv_vgg":
        return RandomConvExtractor(seed=seed, normalize=False, dtype=dtype)
    if name == "identity":
        return IdentityExtractor()
    if name.startswith("lpips"):
        _, _, net = name.partition(":")
        return LpipsExtractor(net or "vgg")
    raise InvalidInputError(f"unknown perceptual extractor {name!r}")
