"""Image files, corpus directories, generator specs and the artifact cache."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import IncompatibleArtifactError, InvalidInputError
from ..generator import GeneratorHandle, NoisePolicy, ToyConfig, load_pretrained, make_toy_generator
from ..stats.whitening import WhiteningModel

CACHE_ENV = "II2S_CACHE_DIR"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "ii2s"
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def load_image(path) -> np.ndarray:
    """8-bit RGB file as a float64 (3, H, W) array in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr.transpose(2, 0, 1)


def save_image(path, img) -> Path:
    """Write a (3, H, W) array in [0, 1] as an 8-bit PNG."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise InvalidInputError(f"expected a (3, H, W) image, got {img.shape}")
    if img.shape[0] == 1:
        img = np.repeat(img, 3, axis=0)
    u8 = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(u8.transpose(1, 2, 0), "RGB").save(path)
    return path


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    path: Path
    resolution: tuple[int, int]
    aligned: bool


@dataclass(frozen=True)
class CorpusIndex:
    entries: tuple[CorpusEntry, ...]

    @classmethod
    def from_paths(cls, paths) -> "CorpusIndex":
        entries, seen = [], set()
        for p in paths:
            p = Path(p)
            if not p.exists():
                raise FileNotFoundError(f"image not found: {p}")
            if p.stem in seen:
                raise InvalidInputError(f"duplicate image id {p.stem!r}")
            seen.add(p.stem)
            with Image.open(p) as im:
                w, h = im.size
            # Alignment is done upstream; square inputs are taken as aligned.
            entries.append(CorpusEntry(p.stem, p, (h, w), h == w))
        return cls(tuple(entries))

    @classmethod
    def from_dir(cls, directory) -> "CorpusIndex":
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"not a directory: {directory}")
        return cls.from_paths(sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES))

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def load(self) -> list[np.ndarray]:
        return [load_image(e.path) for e in self.entries]


def open_generator(spec: str, noise: str = "zeros") -> GeneratorHandle:
    """Resolve ``toy``, ``toy:<seed>``, a toy-config ``.json`` or a checkpoint path."""
    policy = NoisePolicy.parse(noise)
    if spec == "toy" or spec.startswith("toy:"):
        _, _, seed = spec.partition(":")
        return make_toy_generator(seed=int(seed or 0), noise=policy)
    path = Path(spec)
    if path.suffix == ".json":
        if not path.exists():
            raise FileNotFoundError(f"toy generator config not found: {path}")
        raw = json.loads(path.read_text())
        seed = int(raw.pop("seed", 0))
        return make_toy_generator(ToyConfig.from_dict(raw), seed=seed, noise=policy)
    return load_pretrained(path, noise=policy)


def load_model_for(path, g: GeneratorHandle) -> WhiteningModel:
    """Load a whitening model and refuse one fitted on a different generator."""
    m = WhiteningModel.load(path)
    if m.generator_fingerprint and m.generator_fingerprint != g.fingerprint:
        raise IncompatibleArtifactError(
            f"{path} was fitted on generator fingerprint {m.generator_fingerprint}, not {g.fingerprint}; "
            "refit it with `fit` for this generator"
        )
    if m.dim != g.style_dim:
        raise IncompatibleArtifactError(f"{path} has dimension {m.dim}, generator expects {g.style_dim}")
    return m
