"""PCA whitening of P-space latents: fitting, validation and persistence."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from ..archive import load_archive, save_archive
from ..errors import IncompatibleArtifactError, InvalidModelError, RankDeficiencyError

FORMAT_VERSION = 1
DEFAULT_RELATIVE_RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class WhiteningModel:
    """Mean, principal basis and per-axis variances of a latent distribution.

    ``basis`` holds principal directions as columns and ``singular_values``
    the matching eigenvalues of the covariance, sorted descending.
    """

    mu: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    sample_count: int = 0
    ridge: float = 0.0
    generator_fingerprint: str = ""

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64)
        basis = np.array(self.basis, dtype=np.float64)
        lam = np.array(self.singular_values, dtype=np.float64)
        d = mu.shape[0] if mu.ndim == 1 else -1
        if mu.ndim != 1 or basis.shape != (d, d) or lam.shape != (d,):
            raise InvalidModelError(
                f"inconsistent shapes: mu {mu.shape}, basis {basis.shape}, singular values {lam.shape}"
            )
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(basis)) and np.all(np.isfinite(lam))):
            raise InvalidModelError("whitening model contains non-finite values")
        if np.any(lam <= 0) or np.any(lam < self.ridge * (1 - 1e-12)):
            raise InvalidModelError("singular values must be positive and no smaller than the ridge floor")
        if np.any(np.diff(lam) > 0):
            raise InvalidModelError("singular values must be sorted in descending order")
        if np.max(np.abs(basis.T @ basis - np.eye(d))) > 1e-5:
            raise InvalidModelError("basis is not orthonormal")
        for name, arr in (("mu", mu), ("basis", basis), ("singular_values", lam)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.mu, self.basis, self.singular_values):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h.update(self.generator_fingerprint.encode())
        return h.hexdigest()[:16]

    @cached_property
    def covariance(self) -> np.ndarray:
        return (self.basis * self.singular_values) @ self.basis.T

    @cached_property
    def forward_matrix(self) -> np.ndarray:
        """Rows map centered P vectors to whitened coordinates: Λ^{-1/2} Uᵀ."""
        return self.basis.T / np.sqrt(self.singular_values)[:, None]

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        """U Λ^{1/2}."""
        return self.basis * np.sqrt(self.singular_values)[None, :]

    def tensors(self, dtype, device=None):
        """(μ, Λ^{-1/2}Uᵀ, UΛ^{1/2}) as torch tensors, cached per dtype/device."""
        import torch

        cache = self.__dict__.setdefault("_tensor_cache", {})
        key = (dtype, str(device))
        if key not in cache:
            cache[key] = tuple(
                torch.tensor(np.array(a), dtype=dtype, device=device)
                for a in (self.mu, self.forward_matrix, self.inverse_matrix)
            )
        return cache[key]

    def __eq__(self, other):
        return isinstance(other, WhiteningModel) and self.fingerprint == other.fingerprint

    def __hash__(self):
        return hash(self.fingerprint)

    @classmethod
    def identity(cls, dim: int, generator_fingerprint: str = "") -> "WhiteningModel":
        return cls(np.zeros(dim), np.eye(dim), np.ones(dim), generator_fingerprint=generator_fingerprint)

    def save(self, path):
        manifest = {
            "kind": "whitening_model",
            "format_version": FORMAT_VERSION,
            "ridge": float(self.ridge),
            "sample_count": int(self.sample_count),
            "generator_fingerprint": self.generator_fingerprint,
            "fingerprint": self.fingerprint,
        }
        arrays = {"mu": self.mu, "U": self.basis, "lambda": self.singular_values}
        return save_archive(path, arrays, manifest)

    @classmethod
    def load(cls, path) -> "WhiteningModel":
        arrays, manifest = load_archive(path)
        if manifest.get("kind") != "whitening_model":
            raise IncompatibleArtifactError(f"{path} is not a whitening model archive")
        if manifest.get("format_version") != FORMAT_VERSION:
            raise IncompatibleArtifactError(
                f"{path}: unsupported whitening format version {manifest.get('format_version')}"
            )
        model = cls(
            arrays["mu"],
            arrays["U"],
            arrays["lambda"],
            sample_count=int(manifest["sample_count"]),
            ridge=float(manifest["ridge"]),
            generator_fingerprint=manifest.get("generator_fingerprint", ""),
        )
        if manifest.get("fingerprint") not in (None, model.fingerprint):
            raise IncompatibleArtifactError(f"{path}: stored fingerprint does not match contents")
        return model


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        X = samples
    else:
        samples = list(samples)
        X = np.stack([np.asarray(getattr(s, "values", s)) for s in samples]) if samples else np.empty((0, 0))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected an (n, D) sample matrix, got shape {X.shape}")
    return X


def fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def _model_from_covariance(mu, cov, n, ridge, generator_fingerprint) -> WhiteningModel:
    d = mu.shape[0]
    cov = 0.5 * (cov + cov.T)
    if ridge is None:
        if n <= d:
            raise RankDeficiencyError(
                f"{n} samples cannot determine a {d}-dimensional covariance; need at least {d + 1} or pass ridge > 0"
            )
        floor = DEFAULT_RELATIVE_RIDGE * np.trace(cov) / d
    else:
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if n <= d and ridge == 0:
            raise RankDeficiencyError(
                f"{n} samples cannot determine a {d}-dimensional covariance; need at least {d + 1} or pass ridge > 0"
            )
        floor = float(ridge)
    lam, U = np.linalg.eigh(cov)
    order = np.argsort(lam)[::-1]
    lam, U = lam[order], U[:, order]
    lam = np.maximum(lam, floor)
    if not np.all(lam > 0):
        raise RankDeficiencyError("sample covariance is singular (degenerate sample); pass ridge > 0")
    return WhiteningModel(
        mu,
        fix_signs(U),
        lam,
        sample_count=int(n),
        ridge=float(floor),
        generator_fingerprint=generator_fingerprint,
    )


def fit_whitening(samples, ridge: float | None = None, generator_fingerprint: str = "") -> WhiteningModel:
    """Fit μ, U, Λ from P-space samples (array of shape (n, D) or PCode sequence).

    ``ridge=None`` applies a tiny relative floor (1e-8 · trace/D) to the
    eigenvalues and requires n > D; an explicit ``ridge`` is an absolute floor
    and allows rank-deficient samples when positive.
    """
    X = _as_matrix(samples)
    n = X.shape[0]
    if n < 2:
        raise RankDeficiencyError("need at least two samples to estimate a covariance")
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = Xc.T @ Xc / (n - 1)
    return _model_from_covariance(mu, cov, n, ridge, generator_fingerprint)


class WhiteningAccumulator:
    """Streaming mean/covariance accumulator for fits too large to hold in memory.

    Chunks are accumulated around a fixed shift (the first chunk's mean) so
    the result does not suffer from catastrophic cancellation.
    """

    def __init__(self):
        self.n = 0
        self._shift = None
        self._sum = None
        self._outer = None

    def update(self, chunk: np.ndarray) -> None:
        chunk = np.asarray(chunk, dtype=np.float64)
        if self._shift is None:
            self._shift = chunk.mean(axis=0)
            d = chunk.shape[1]
            self._sum = np.zeros(d)
            self._outer = np.zeros((d, d))
        c = chunk - self._shift
        self.n += chunk.shape[0]
        self._sum += c.sum(axis=0)
        self._outer += c.T @ c

    def finalize(self, ridge: float | None = None, generator_fingerprint: str = "") -> WhiteningModel:
        if self.n < 2:
            raise RankDeficiencyError("need at least two samples to estimate a covariance")
        mean_c = self._sum / self.n
        cov = (self._outer - self.n * np.outer(mean_c, mean_c)) / (self.n - 1)
        return _model_from_covariance(self._shift + mean_c, cov, self.n, ridge, generator_fingerprint)


def fit_whitening_chunks(chunks: Iterable[np.ndarray], ridge=None, generator_fingerprint="") -> WhiteningModel:
    acc = WhiteningAccumulator()
    for chunk in chunks:
        acc.update(chunk)
    return acc.finalize(ridge, generator_fingerprint)
