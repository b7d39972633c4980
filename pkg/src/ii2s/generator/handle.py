"""Generator contract: spec, noise policy, handle and the toy/pretrained constructors."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import torch

from ..errors import InvalidInputError, UnsupportedCheckpointError
from ..latent_spaces import WCode, WPlusCode, ZCode
from .layers import StyleGenerator, default_channels

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def num_style_layers(resolution: int) -> int:
    return 2 * int(np.log2(resolution)) - 2


@dataclass(frozen=True)
class GeneratorSpec:
    style_dim: int
    num_layers: int
    resolution: int
    mapping_depth: int
    source: str  # "toy:<seed>" or a checkpoint path

    def __post_init__(self):
        if self.style_dim < 2:
            raise InvalidInputError("style_dim must be at least 2")
        if self.num_layers != num_style_layers(self.resolution):
            raise InvalidInputError(
                f"resolution {self.resolution} implies {num_style_layers(self.resolution)} style layers, "
                f"not {self.num_layers}"
            )


@dataclass(frozen=True)
class NoisePolicy:
    """Per-layer noise maps are fixed for the lifetime of a handle: all zeros or seeded random."""

    mode: str = "zeros"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("zeros", "frozen_random"):
            raise InvalidInputError(f"unknown noise mode {self.mode!r}")

    @classmethod
    def parse(cls, text: str) -> "NoisePolicy":
        if text in ("zeros", "zero", "none"):
            return cls("zeros")
        if text.startswith("random"):
            _, _, seed = text.partition(":")
            return cls("frozen_random", int(seed or 0))
        raise InvalidInputError(f"cannot parse noise policy {text!r}; use 'zeros' or 'random:<seed>'")


@dataclass(frozen=True)
class ToyConfig:
    """Desk-scale generator settings; the defaults keep a full inversion in seconds."""

    style_dim: int = 16
    resolution: int = 16
    mapping_depth: int = 4
    channels: int = 32
    output_gain: float = 0.5
    noise_strength: float = 0.1
    masked_layers: tuple[int, ...] = ()
    dtype: str = "float64"

    @classmethod
    def from_dict(cls, d: dict) -> "ToyConfig":
        d = dict(d)
        if "masked_layers" in d:
            d["masked_layers"] = tuple(d["masked_layers"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown toy generator keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ToyConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class GeneratorHandle:
    """A frozen mapping + synthesis network that is differentiable in its latent inputs.

    Tensor-level methods (``map_tensor``, ``synthesize_tensor``) keep the
    autograd graph; array-level methods return numpy without gradients.
    """

    def __init__(
        self,
        net: StyleGenerator,
        spec: GeneratorSpec,
        noise: NoisePolicy = NoisePolicy(),
        *,
        output: str = "tanh",
        output_gain: float = 1.0,
        masked_layers=(),
        dtype=torch.float64,
    ):
        last = net.style[-1]
        if getattr(last, "activation", None) != "fused_lrelu":
            raise InvalidInputError("mapping network must end in a 0.2-slope leaky ReLU")
        self.net = net.to(dtype).eval().requires_grad_(False)
        self.spec = spec
        self.noise_policy = noise
        self.output = output
        self.output_gain = float(output_gain)
        self.masked_layers = tuple(sorted(set(masked_layers)))
        self.dtype = dtype
        self._noise = self._make_noise(noise)

    def _make_noise(self, policy: NoisePolicy) -> list[torch.Tensor]:
        shapes = [getattr(self.net.noises, f"noise_{i}").shape for i in range(self.net.num_layers)]
        if policy.mode == "zeros":
            return [torch.zeros(s, dtype=self.dtype) for s in shapes]
        gen = torch.Generator().manual_seed(policy.seed)
        return [torch.randn(s, generator=gen, dtype=torch.float64).to(self.dtype) for s in shapes]

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(asdict(self.spec) | {"source": ""}, sort_keys=True).encode())
        for name, t in sorted(self.net.state_dict().items()):
            h.update(name.encode())
            h.update(t.detach().cpu().to(torch.float64).numpy().tobytes())
        h.update(f"{self.output}:{self.output_gain}:{self.masked_layers}:{self.noise_policy}".encode())
        return h.hexdigest()[:16]

    @property
    def style_dim(self) -> int:
        return self.spec.style_dim

    @property
    def num_layers(self) -> int:
        return self.spec.num_layers

    @property
    def resolution(self) -> int:
        return self.spec.resolution

    # tensor level ---------------------------------------------------------

    def map_tensor(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[-1] != self.style_dim:
            raise InvalidInputError(f"z has dimension {z.shape[-1]}, generator expects {self.style_dim}")
        lead = z.shape[:-1]
        return self.net.mapping(z.reshape(-1, self.style_dim)).reshape(*lead, self.style_dim)

    def synthesize_tensor(self, ws: torch.Tensor) -> torch.Tensor:
        """(B, L, D) styles → (B, 3, R, R) image in [−1, 1]."""
        if ws.ndim != 3 or ws.shape[1:] != (self.num_layers, self.style_dim):
            raise InvalidInputError(
                f"expected styles of shape (B, {self.num_layers}, {self.style_dim}), got {tuple(ws.shape)}"
            )
        if self.masked_layers:
            keep = torch.ones(self.num_layers, 1, dtype=ws.dtype)
            keep[list(self.masked_layers)] = 0.0
            ws = ws * keep
        img = self.net.synthesis(ws, self._noise) * self.output_gain
        if self.output == "tanh":
            return torch.tanh(img)
        return img.clamp(-1.0, 1.0)

    # array level ----------------------------------------------------------

    def map_array(self, z: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.map_tensor(torch.tensor(np.array(z), dtype=self.dtype)).to(torch.float64).numpy()

    def synthesize_array(self, ws: np.ndarray) -> np.ndarray:
        ws = np.asarray(ws)
        single = ws.ndim == 2
        with torch.no_grad():
            t = torch.tensor(np.array(ws[None] if single else ws), dtype=self.dtype)
            img = self.synthesize_tensor(t).to(torch.float64).numpy()
        return img[0] if single else img


# --- module-level contract operations ------------------------------------


def map_z_to_w(g: GeneratorHandle, z: ZCode) -> WCode:
    if z.dim != g.style_dim:
        raise InvalidInputError(f"z has dimension {z.dim}, generator expects {g.style_dim}")
    return WCode(g.map_array(z.values[None])[0])


def _check_wplus(g: GeneratorHandle, w_plus: WPlusCode):
    if w_plus.values.shape != (g.num_layers, g.style_dim):
        raise InvalidInputError(
            f"W+ code of shape {w_plus.values.shape} does not fit generator ({g.num_layers}, {g.style_dim})"
        )


def synthesize(g: GeneratorHandle, w_plus: WPlusCode) -> np.ndarray:
    """Image as a (3, R, R) float64 array in [−1, 1]."""
    _check_wplus(g, w_plus)
    return g.synthesize_array(w_plus.values)


def gradient_of_synthesis(g: GeneratorHandle, w_plus: WPlusCode, upstream) -> np.ndarray:
    """∂⟨upstream, synthesize(g, w⁺)⟩ / ∂w⁺ as an (L, D) array."""
    _check_wplus(g, w_plus)
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (3, g.resolution, g.resolution):
        raise InvalidInputError(f"upstream has shape {up.shape}, expected (3, {g.resolution}, {g.resolution})")
    if not np.all(np.isfinite(up)):
        raise InvalidInputError("upstream gradient contains non-finite values")
    ws = torch.tensor(w_plus.values[None], dtype=g.dtype, requires_grad=True)
    out = g.synthesize_tensor(ws)
    torch.sum(out * torch.as_tensor(up[None], dtype=g.dtype)).backward()
    return ws.grad[0].to(torch.float64).numpy()


def make_toy_generator(config: ToyConfig | None = None, seed: int = 0, noise: NoisePolicy = NoisePolicy()) -> GeneratorHandle:
    """Randomly initialized, fixed-weight StyleGAN2-like generator for desk-scale work."""
    cfg = config or ToyConfig()
    channels = {r: cfg.channels for r in default_channels(cfg.resolution)}
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = StyleGenerator(cfg.resolution, cfg.style_dim, cfg.mapping_depth, channels)
        with torch.no_grad():
            for mod in net.modules():
                if mod.__class__.__name__ == "NoiseInjection":
                    mod.weight.fill_(cfg.noise_strength)
    spec = GeneratorSpec(cfg.style_dim, net.n_latent, cfg.resolution, cfg.mapping_depth, f"toy:{seed}")
    return GeneratorHandle(
        net,
        spec,
        noise,
        output="tanh",
        output_gain=cfg.output_gain,
        masked_layers=cfg.masked_layers,
        dtype=_DTYPES[cfg.dtype],
    )


def _infer_architecture(sd: dict) -> dict:
    try:
        style_dim = sd["style.1.weight"].shape[1]
        n_mlp = len([k for k in sd if k.startswith("style.") and k.endswith(".weight")])
        n_rgb = len({k.split(".")[1] for k in sd if k.startswith("to_rgbs.")})
        resolution = 2 ** (n_rgb + 2)
        channels = {4: sd["input.input"].shape[1]}
        for i in range(n_rgb):
            channels[2 ** (i + 3)] = sd[f"convs.{2 * i}.conv.weight"].shape[1]
    except (KeyError, IndexError, AttributeError) as exc:
        raise UnsupportedCheckpointError(
            "checkpoint does not match the stylegan2-pytorch generator layout "
            f"(missing {exc}); convert official pickles with that project's convert_weight.py"
        ) from exc
    return {"style_dim": style_dim, "n_mlp": n_mlp, "resolution": resolution, "channels": channels}


def load_pretrained(path, noise: NoisePolicy = NoisePolicy(), dtype=torch.float32) -> GeneratorHandle:
    """Load a StyleGAN2 generator saved in the stylegan2-pytorch state-dict layout.

    Accepts either a bare generator state dict or a training checkpoint
    containing ``g_ema``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"generator checkpoint not found: {path}")
    if path.suffix == ".pkl":
        raise UnsupportedCheckpointError(
            f"{path}: NVIDIA pickles are not read directly; convert to a stylegan2-pytorch .pt state dict first"
        )
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise UnsupportedCheckpointError(f"{path}: not a readable torch checkpoint ({exc})") from exc
    if isinstance(ckpt, dict) and "g_ema" in ckpt:
        ckpt = ckpt["g_ema"]
    if not isinstance(ckpt, dict):
        raise UnsupportedCheckpointError(f"{path}: expected a state dict, got {type(ckpt).__name__}")
    arch = _infer_architecture(ckpt)
    net = StyleGenerator(arch["resolution"], arch["style_dim"], arch["n_mlp"], arch["channels"])
    try:
        net.load_state_dict(ckpt, strict=True)
    except RuntimeError as exc:
        raise UnsupportedCheckpointError(f"{path}: state dict does not match the inferred architecture: {exc}") from exc
    spec = GeneratorSpec(arch["style_dim"], net.n_latent, arch["resolution"], arch["n_mlp"], str(path))
    return GeneratorHandle(net, spec, noise, output="clamp", dtype=dtype)
