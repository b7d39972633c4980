"""Interpolation, style mixing, principal-direction edits and generator swaps.

Edits act on W+ codes. Interpolation is also offered in P_N+ for comparison,
though moving through the whitened space is not the recommended way to edit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, StaleCodeError
from .generator import GeneratorHandle, synthesize
from .latent_spaces import PnPlusCode, WPlusCode
from .stats.whitening import WhiteningModel

EDIT_MULTIPLES = (-2.0, -1.0, 0.0, 1.0, 2.0)
DEFAULT_SPLIT = 7


@dataclass(frozen=True)
class EditDirection:
    """Unit direction in W with the standard deviation along it."""

    index: int
    direction: np.ndarray
    sigma: float

    def __post_init__(self):
        d = np.array(self.direction, dtype=np.float64)
        if d.ndim != 1 or not np.all(np.isfinite(d)):
            raise InvalidInputError("direction must be a finite 1-d vector")
        norm = np.linalg.norm(d)
        if norm == 0:
            raise InvalidInputError("direction must be nonzero")
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise InvalidInputError(f"sigma must be positive, got {self.sigma}")
        d = d / norm
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_model(cls, m: WhiteningModel, k: int) -> "EditDirection":
        if not 0 <= k < m.dim:
            raise IndexError(f"component {k} out of range for dimension {m.dim}")
        return cls(k, m.basis[:, k], float(np.sqrt(m.singular_values[k])))

    @classmethod
    def from_vector(cls, vector, sigma: float = 1.0, index: int = -1) -> "EditDirection":
        """Wrap an externally supplied direction, e.g. one exported from an attribute model."""
        return cls(index, np.asarray(vector, dtype=np.float64), sigma)


def lerp(a, b, t: float):
    """``(1 − t)·a + t·b``, evaluated as ``a + t·(b − a)`` so ``lerp(a, a, t)`` is exactly ``a``.

    The endpoints are returned as the input objects.
    """
    if type(a) is not type(b) or not isinstance(a, (WPlusCode, PnPlusCode)):
        raise InvalidInputError(f"cannot interpolate {type(a).__name__} with {type(b).__name__}")
    if a.values.shape != b.values.shape:
        raise InvalidInputError(f"shape mismatch {a.values.shape} vs {b.values.shape}")
    if isinstance(a, PnPlusCode) and a.fingerprint != b.fingerprint:
        raise StaleCodeError("codes were whitened by different models")
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return a
    if t == 1.0:
        return b
    values = a.values + t * (b.values - a.values)
    if isinstance(a, PnPlusCode):
        return PnPlusCode(values, fingerprint=a.fingerprint)
    return WPlusCode(values)


def style_mix(a: WPlusCode, b: WPlusCode, split: int = DEFAULT_SPLIT) -> WPlusCode:
    """First ``split`` layers from ``a``, the rest from ``b``."""
    if not isinstance(a, WPlusCode) or not isinstance(b, WPlusCode):
        raise InvalidInputError("style_mix takes two W+ codes")
    if a.values.shape != b.values.shape:
        raise InvalidInputError(f"shape mismatch {a.values.shape} vs {b.values.shape}")
    if not 1 <= split < a.num_layers:
        raise InvalidInputError(f"split must be in [1, {a.num_layers - 1}], got {split}")
    return WPlusCode(np.concatenate([a.values[:split], b.values[split:]]))


def pca_edit(w_plus: WPlusCode, d: EditDirection, multiple: float) -> WPlusCode:
    """Move every layer by ``multiple·σ`` along the direction."""
    if d.direction.shape[0] != w_plus.dim:
        raise InvalidInputError(f"direction has dimension {d.direction.shape[0]}, code has {w_plus.dim}")
    if multiple == 0:
        return w_plus
    return WPlusCode(w_plus.values + (multiple * d.sigma) * d.direction[None, :])


def style_transfer(w_plus: WPlusCode, g_target: GeneratorHandle) -> np.ndarray:
    """Render a code embedded with one generator through another of the same shape."""
    if w_plus.values.shape != (g_target.num_layers, g_target.style_dim):
        raise InvalidInputError(
            f"code of shape {w_plus.values.shape} does not fit target generator "
            f"({g_target.num_layers}, {g_target.style_dim})"
        )
    return synthesize(g_target, w_plus)
