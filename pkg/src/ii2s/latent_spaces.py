"""Typed latent codes for the Z, W, W+, P, P_N and P_N+ spaces and the maps between them.

W and P are related elementwise by the mapping network's final leaky
rectifier (negative slope 0.2, inverted with slope 5). P and P_N are related
by the affine whitening map ``v = Λ^{-1/2} Uᵀ (x - μ)``. The ``+`` variants
store one vector per synthesis layer and apply the same maps layer by layer
with a single whitening model.

The array-level helpers (``leaky_w_to_p`` and friends) accept numpy arrays or
torch tensors with a trailing dimension D, so the inversion code can
differentiate through exactly the same maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import ClassVar, Sequence

import numpy as np
import torch

from .archive import load_archive, save_archive
from .errors import IncompatibleArtifactError, InvalidInputError, StaleCodeError
from .stats.whitening import WhiteningModel

P_SLOPE = 5.0  # inverse of the mapping network's 0.2 negative slope


class Space(str, Enum):
    Z = "Z"
    Z_PLUS = "Z+"
    W = "W"
    W_PLUS = "W+"
    P = "P"
    P_N = "P_N"
    P_N_PLUS = "P_N+"


@dataclass(frozen=True, eq=False)
class LatentCode:
    """Immutable array of latent values tagged with the space it lives in."""

    values: np.ndarray
    space: ClassVar[Space]
    plus: ClassVar[bool] = False

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        want = 2 if self.plus else 1
        if arr.ndim != want:
            raise InvalidInputError(
                f"{type(self).__name__} expects a {want}-d array, got shape {arr.shape}"
            )
        if arr.shape[-1] < 1 or (self.plus and arr.shape[0] < 1):
            raise InvalidInputError(f"{type(self).__name__} cannot be empty")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"{type(self).__name__} contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def num_layers(self) -> int:
        return self.values.shape[0] if self.plus else 1

    @property
    def layers(self) -> np.ndarray:
        """Values as an (L, D) array; a single-vector code is one layer."""
        return self.values if self.plus else self.values[None, :]

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and getattr(self, "fingerprint", None) == getattr(other, "fingerprint", None)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((type(self).__name__, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class ZCode(LatentCode):
    space: ClassVar[Space] = Space.Z


@dataclass(frozen=True, eq=False)
class ZPlusCode(LatentCode):
    space: ClassVar[Space] = Space.Z_PLUS
    plus: ClassVar[bool] = True


@dataclass(frozen=True, eq=False)
class WCode(LatentCode):
    space: ClassVar[Space] = Space.W


@dataclass(frozen=True, eq=False)
class PCode(LatentCode):
    space: ClassVar[Space] = Space.P


@dataclass(frozen=True, eq=False)
class WPlusCode(LatentCode):
    space: ClassVar[Space] = Space.W_PLUS
    plus: ClassVar[bool] = True


@dataclass(frozen=True, eq=False)
class PnCode(LatentCode):
    fingerprint: str = ""
    space: ClassVar[Space] = Space.P_N


@dataclass(frozen=True, eq=False)
class PnPlusCode(LatentCode):
    fingerprint: str = ""
    space: ClassVar[Space] = Space.P_N_PLUS
    plus: ClassVar[bool] = True


CODE_TYPES = {cls.space: cls for cls in (ZCode, ZPlusCode, WCode, PCode, WPlusCode, PnCode, PnPlusCode)}


# --- array-level maps (numpy or torch) -------------------------------------


def _where_negative(a, neg, pos):
    if isinstance(a, torch.Tensor):
        return torch.where(a >= 0, pos, neg)
    return np.where(a >= 0, pos, neg)


def leaky_w_to_p(w):
    """Invert the final 0.2-slope leaky ReLU: negative entries are multiplied by 5."""
    return _where_negative(w, w * P_SLOPE, w)


def leaky_p_to_w(x):
    return _where_negative(x, x / P_SLOPE, x)


def _model_arrays(m: WhiteningModel, like):
    if isinstance(like, torch.Tensor):
        return m.tensors(like.dtype, like.device)
    return m.mu, m.forward_matrix, m.inverse_matrix


def whiten(x, m: WhiteningModel):
    """``Λ^{-1/2} Uᵀ (x - μ)`` applied along the last axis."""
    mu, fwd, _ = _model_arrays(m, x)
    return (x - mu) @ fwd.T


def unwhiten(v, m: WhiteningModel):
    """``U Λ^{1/2} v + μ`` applied along the last axis."""
    mu, _, inv = _model_arrays(m, v)
    return v @ inv.T + mu


# --- typed operations -------------------------------------------------------


def _check_dim(code: LatentCode, m: WhiteningModel):
    if code.dim != m.dim:
        raise InvalidInputError(f"code dimension {code.dim} does not match whitening model dimension {m.dim}")


def _check_fingerprint(code, m: WhiteningModel):
    if code.fingerprint != m.fingerprint:
        raise StaleCodeError(
            f"code was whitened with model {code.fingerprint or '<none>'}, not {m.fingerprint}"
        )


def w_to_p(w: WCode) -> PCode:
    return PCode(leaky_w_to_p(w.values))


def p_to_w(x: PCode) -> WCode:
    return WCode(leaky_p_to_w(x.values))


def p_to_pn(x: PCode, m: WhiteningModel) -> PnCode:
    _check_dim(x, m)
    return PnCode(whiten(x.values, m), fingerprint=m.fingerprint)


def pn_to_p(v: PnCode, m: WhiteningModel) -> PCode:
    _check_fingerprint(v, m)
    return PCode(unwhiten(v.values, m))


def wplus_to_pnplus(w_plus: WPlusCode, m: WhiteningModel) -> PnPlusCode:
    _check_dim(w_plus, m)
    return PnPlusCode(whiten(leaky_w_to_p(w_plus.values), m), fingerprint=m.fingerprint)


def pnplus_to_wplus(v: PnPlusCode, m: WhiteningModel) -> WPlusCode:
    _check_fingerprint(v, m)
    return WPlusCode(leaky_p_to_w(unwhiten(v.values, m)))


def broadcast_w(w: WCode, num_layers: int) -> WPlusCode:
    if num_layers < 1:
        raise InvalidInputError("num_layers must be at least 1")
    return WPlusCode(np.repeat(w.values[None, :], num_layers, axis=0))


def mahalanobis_sq(v: PnCode | PnPlusCode) -> float:
    """Squared Mahalanobis distance of the underlying P point(s): ``‖v‖²``, summed over layers."""
    if not isinstance(v, (PnCode, PnPlusCode)):
        raise InvalidInputError(f"mahalanobis_sq needs a whitened code, got {type(v).__name__}")
    return float(np.sum(v.values**2))


def center_code(m: WhiteningModel, num_layers: int) -> PnPlusCode:
    """The all-zero P_N+ code, i.e. every layer at the distribution mode μ."""
    return PnPlusCode(np.zeros((num_layers, m.dim)), fingerprint=m.fingerprint)


# --- persistence ------------------------------------------------------------

ARCHIVE_KIND = "latent_codes"


def save_codes(path, codes: Sequence[LatentCode], generator_id: str = "", extra: dict | None = None) -> Path:
    """Write a homogeneous batch of codes as one stacked array named ``codes``."""
    codes = list(codes)
    if not codes:
        raise InvalidInputError("no codes to save")
    kinds = {type(c) for c in codes}
    shapes = {c.values.shape for c in codes}
    prints = {getattr(c, "fingerprint", "") for c in codes}
    if len(kinds) != 1 or len(shapes) != 1 or len(prints) != 1:
        raise InvalidInputError("all codes in an archive must share type, shape and model fingerprint")
    first = codes[0]
    manifest = {
        "kind": ARCHIVE_KIND,
        "space": first.space.value,
        "num_layers": first.num_layers,
        "dim": first.dim,
        "count": len(codes),
        "model_fingerprint": prints.pop(),
        "generator_id": generator_id,
    }
    clash = set(extra or {}) & set(manifest)
    if clash:
        raise InvalidInputError(f"extra metadata may not override {sorted(clash)}")
    manifest.update(extra or {})
    return save_archive(path, {"codes": np.stack([c.values for c in codes])}, manifest)


def load_codes(path) -> tuple[list[LatentCode], dict]:
    arrays, manifest = load_archive(path)
    if manifest.get("kind") != ARCHIVE_KIND or "codes" not in arrays:
        raise IncompatibleArtifactError(f"{path} is not a latent code archive")
    cls = CODE_TYPES[Space(manifest["space"])]
    kwargs = {"fingerprint": manifest.get("model_fingerprint", "")} if cls in (PnCode, PnPlusCode) else {}
    codes = [cls(v, **kwargs) for v in arrays["codes"]]
    return codes, manifest
