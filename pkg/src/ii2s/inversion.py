"""Optimization-based embedding of images into a generator's latent space.

The default parameterization optimizes the P_N+ code ``v`` directly, so
the regularizer is the plain squared norm ``λ‖v‖²`` and the generator sees
``w⁺ = LeakyReLU_{0.2}(U Λ^{1/2} v + μ)`` layer by layer. The other
parameterizations exist for baselines and ablations: ``w_plus`` (optimize
w⁺, regularize through the map), ``w`` (one vector broadcast to all layers)
and ``z_plus`` (one z per layer pushed through the mapping network).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from .conditions import IDENTITY, ConditionFn
from .errors import DivergedError, InvalidInputError
from .generator import GeneratorHandle
from .latent_spaces import (
    PnPlusCode,
    WPlusCode,
    leaky_p_to_w,
    leaky_w_to_p,
    unwhiten,
    whiten,
)
from .losses import LossWeights, prepare_generated, prepare_reference, to_unit_range, total_loss_per_image
from .perceptual import make_extractor
from .stats.whitening import WhiteningModel

PARAMETERIZATIONS = ("pn_plus", "w_plus", "w", "z_plus")


@dataclass(frozen=True)
class AdamSettings:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class InversionConfig:
    lam: float = 0.005
    steps: int = 1300
    learning_rate: float = 0.01
    adam: AdamSettings = AdamSettings()
    parameterization: str = "pn_plus"
    init: str = "center"
    seed: int = 0
    condition: ConditionFn = IDENTITY
    trace_every: int = 10
    w_perceptual: float = 1.0
    w_pixel: float = 1.0
    loss_resolution: int | None = 256
    extractor: str = "random_conv"
    extractor_seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidInputError("steps must be at least 1")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning rate must be positive")
        if self.lam < 0:
            raise InvalidInputError("lambda must be nonnegative")
        if self.parameterization not in PARAMETERIZATIONS:
            raise InvalidInputError(f"parameterization must be one of {PARAMETERIZATIONS}")
        if self.init not in ("center", "random"):
            raise InvalidInputError("init must be 'center' or 'random'")
        if self.trace_every < 1:
            raise InvalidInputError("trace_every must be at least 1")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.w_perceptual, self.w_pixel, self.lam)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["condition"] = self.condition.describe()
        return d


@dataclass(frozen=True)
class TraceEntry:
    step: int
    total: float
    perceptual: float
    pixel: float
    regularizer: float
    v_norm_sq: float

    @property
    def reconstruction(self) -> float:
        return self.perceptual + self.pixel


@dataclass
class InversionResult:
    w_plus: WPlusCode
    v: PnPlusCode
    final_losses: dict
    trace: list[TraceEntry]
    config: InversionConfig
    wall_time: float
    image: np.ndarray = field(repr=False)  # final reconstruction, (3, R, R) in [0, 1]

    @property
    def v_norm_sq(self) -> float:
        return float(np.sum(self.v.values**2))


class _Parameterization:
    """Maps the (B, ...) optimization variable to (w⁺, regularized v, traced v)."""

    def __init__(self, kind: str, g: GeneratorHandle, m: WhiteningModel, init: str, seed: int, batch: int):
        self.kind, self.g, self.m = kind, g, m
        dtype = g.dtype
        L, D = g.num_layers, g.style_dim

        def start_point():
            # Every image in a batch starts where a single-image run with this seed would.
            if init == "center" and kind != "z_plus":
                return torch.zeros(L, D, dtype=torch.float64)
            # No natural center exists in Z; z+ always starts from seeded normal draws.
            return torch.randn(L, D, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)

        var = start_point().to(dtype).expand(batch, L, D)
        if kind in ("w_plus", "w"):
            var = leaky_p_to_w(unwhiten(var, m))
            if kind == "w":
                var = var[:, 0]
        self.var = var.clone().requires_grad_(True)

    def __call__(self):
        var, g, m = self.var, self.g, self.m
        if self.kind == "pn_plus":
            return leaky_p_to_w(unwhiten(var, m)), var, var
        if self.kind == "w_plus":
            v = whiten(leaky_w_to_p(var), m)
            return var, v, v
        if self.kind == "w":
            v1 = whiten(leaky_w_to_p(var), m)[:, None, :]
            L = g.num_layers
            return var[:, None, :].expand(-1, L, -1), v1, v1.expand(-1, L, -1)
        w_plus = g.map_tensor(var)
        v = whiten(leaky_w_to_p(w_plus), m)
        return w_plus, v, v


def _image_batch(images, dtype) -> torch.Tensor:
    if isinstance(images, torch.Tensor):
        t = images.to(dtype)
    elif isinstance(images, np.ndarray):
        t = torch.as_tensor(np.array(images), dtype=dtype)
    else:
        t = torch.stack([torch.as_tensor(np.array(i), dtype=dtype) for i in images])
    if t.ndim == 3:
        t = t[None]
    if t.ndim != 4 or t.shape[1] != 3:
        raise InvalidInputError(f"expected RGB images of shape (3, H, W), got {tuple(t.shape)}")
    if not torch.all(torch.isfinite(t)) or t.min() < 0 or t.max() > 1:
        raise InvalidInputError("image values must be finite and within [0, 1]")
    return t


def _check_model(g: GeneratorHandle, m: WhiteningModel):
    if m.dim != g.style_dim:
        raise InvalidInputError(f"whitening model dimension {m.dim} does not match generator style dim {g.style_dim}")


def _optimize(images, f: ConditionFn, g: GeneratorHandle, m: WhiteningModel, cfg: InversionConfig) -> list[InversionResult]:
    _check_model(g, m)
    start = time.perf_counter()
    dtype = g.dtype
    ref = prepare_reference(_image_batch(images, dtype), cfg.loss_resolution)
    batch = ref.shape[0]
    extractor = make_extractor(cfg.extractor, seed=cfg.extractor_seed, dtype=dtype)
    weights = cfg.weights
    param = _Parameterization(cfg.parameterization, g, m, cfg.init, cfg.seed, batch)
    opt = torch.optim.Adam(
        [param.var], lr=cfg.learning_rate, betas=(cfg.adam.beta1, cfg.adam.beta2), eps=cfg.adam.eps
    )

    traces: list[list[TraceEntry]] = [[] for _ in range(batch)]
    for step in range(cfg.steps + 1):
        w_plus, v_reg, v_all = param()
        gen = to_unit_range(g.synthesize_tensor(w_plus))
        gen = prepare_generated(f(gen), ref.shape[-1])
        if gen.shape != ref.shape:
            raise InvalidInputError(
                f"conditioned output has shape {tuple(gen.shape[1:])} but the input image is {tuple(ref.shape[1:])}"
            )
        per_image, comps = total_loss_per_image(ref, gen, v_reg, weights, extractor)
        if step % cfg.trace_every == 0 or step == cfg.steps:
            rows = torch.stack(
                [
                    per_image.detach(),
                    comps["perceptual"].detach(),
                    comps["pixel"].detach(),
                    comps["regularizer"].detach(),
                    torch.sum(v_all.detach() ** 2, dim=(1, 2)),
                ],
                dim=1,
            ).to(torch.float64).tolist()
            for b, row in enumerate(rows):
                traces[b].append(TraceEntry(step, *row))
        if not torch.all(torch.isfinite(per_image)):
            raise DivergedError(f"non-finite loss at step {step}", traces[0] if batch == 1 else traces)
        if step == cfg.steps:
            break
        opt.zero_grad(set_to_none=True)
        per_image.sum().backward()
        opt.step()

    with torch.no_grad():
        w_plus, _, v_all = param()
        out_images = to_unit_range(g.synthesize_tensor(w_plus)).to(torch.float64).numpy()
    w_plus = w_plus.detach().to(torch.float64).numpy()
    v_all = v_all.detach().to(torch.float64).numpy()
    elapsed = time.perf_counter() - start
    results = []
    for b in range(batch):
        final = traces[b][-1]
        results.append(
            InversionResult(
                w_plus=WPlusCode(w_plus[b]),
                v=PnPlusCode(v_all[b], fingerprint=m.fingerprint),
                final_losses={
                    "total": final.total,
                    "perceptual": final.perceptual,
                    "pixel": final.pixel,
                    "regularizer": final.regularizer,
                    "reconstruction": final.reconstruction,
                    "v_norm_sq": final.v_norm_sq,
                },
                trace=traces[b],
                config=cfg,
                wall_time=elapsed / batch,
                image=out_images[b],
            )
        )
    return results


def invert_conditional(image, f: ConditionFn, g: GeneratorHandle, m: WhiteningModel, cfg: InversionConfig) -> InversionResult:
    """Minimize ``L(I, f(G(w⁺))) + λ‖v‖²`` with Adam; ``image`` is already in conditioned form."""
    image = np.asarray(image) if not isinstance(image, torch.Tensor) else image
    if image.ndim != 3:
        raise InvalidInputError(f"expected one (3, H, W) image, got shape {tuple(image.shape)}")
    return _optimize(image[None], f, g, m, cfg)[0]


def invert(image, g: GeneratorHandle, m: WhiteningModel, cfg: InversionConfig = InversionConfig()) -> InversionResult:
    """Embed ``image`` (RGB, [0, 1]) by minimizing ``L(I, G(w⁺)) + λ‖v‖²``."""
    return invert_conditional(image, cfg.condition, g, m, cfg)


def invert_w(image, g, m, cfg: InversionConfig = InversionConfig()) -> InversionResult:
    """W-space baseline: one style vector shared by every layer."""
    return invert(image, g, m, replace(cfg, parameterization="w"))


def invert_zplus(image, g, m, cfg: InversionConfig = InversionConfig()) -> InversionResult:
    """Z+ ablation: one z per layer, each pushed through the mapping network."""
    return invert(image, g, m, replace(cfg, parameterization="z_plus"))


def _invert_worker(args):
    images, g, m, cfg = args
    torch.set_num_threads(1)
    return _optimize(images, cfg.condition, g, m, cfg)


def invert_batch(images, g, m, cfg: InversionConfig = InversionConfig(), jobs: int = 1, batch_size: int = 16) -> list[InversionResult]:
    """Invert several images, ``batch_size`` at a time in one vectorized optimization.

    The objective is a sum of per-image terms and Adam acts per coordinate,
    so each image follows its own trajectory. ``jobs > 1`` spreads chunks
    over worker processes; results always come back in input order.
    """
    images = [np.asarray(i) for i in images]
    chunks = [np.stack(images[i : i + batch_size]) for i in range(0, len(images), batch_size)]
    if jobs <= 1 or len(chunks) <= 1:
        out = [_optimize(c, cfg.condition, g, m, cfg) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_invert_worker, [(c, g, m, cfg) for c in chunks]))
    return [r for chunk in out for r in chunk]
