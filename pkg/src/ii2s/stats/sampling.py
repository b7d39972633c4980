"""Sampling W latents from a generator's mapping network."""

from __future__ import annotations

import numpy as np

CHUNK = 8192


def _z_chunks(n: int, dim: int, seed: int, chunk: int = CHUNK):
    # One child stream per fixed-size chunk keeps outputs independent of how callers batch.
    n_chunks = -(-n // chunk)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        m = min(chunk, n - i * chunk)
        yield np.random.default_rng(child).standard_normal((m, dim))


def sample_z(n: int, dim: int, seed: int) -> np.ndarray:
    """Standard normal Z samples, rescaled onto the √D hypersphere."""
    z = np.concatenate(list(_z_chunks(n, dim, seed)))
    return z * (np.sqrt(dim) / np.linalg.norm(z, axis=1, keepdims=True))


def iter_w_chunks(g, n: int, seed: int):
    """Yield (n_chunk, D) arrays of mapped W codes for n samples in total."""
    if n < 1:
        raise ValueError("n must be at least 1")
    for z in _z_chunks(n, g.spec.style_dim, seed):
        yield g.map_array(z)


def sample_w_array(g, n: int, seed: int) -> np.ndarray:
    return np.concatenate(list(iter_w_chunks(g, n, seed)))


def sample_w_codes(g, n: int, seed: int):
    from ..latent_spaces import WCode

    return [WCode(w) for w in sample_w_array(g, n, seed)]
