from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import StaleCodeError


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    dimension_index: int
    space_tag: str

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {
            "bin_edges": self.bin_edges.tolist(),
            "counts": self.counts.tolist(),
            "total": self.total,
            "dimension_index": self.dimension_index,
            "space_tag": self.space_tag,
        }


def pooled_dimension(codes, k: int) -> np.ndarray:
    """Coordinate ``k`` of every layer of every code, concatenated."""
    codes = list(codes)
    if not codes:
        raise ValueError("no codes given")
    prints = {getattr(c, "fingerprint", None) for c in codes}
    if len(prints) != 1:
        raise StaleCodeError("codes were whitened with different models")
    dim = codes[0].values.shape[-1]
    if not 0 <= k < dim:
        raise IndexError(f"dimension index {k} out of range for D={dim}")
    return np.concatenate([np.atleast_2d(c.values)[:, k] for c in codes])


def histogram_dimension(codes, k: int = 20, bins=50, value_range=None) -> Histogram:
    """Histogram of the k-th P_N+ coordinate pooled over all layers of all codes."""
    codes = list(codes)
    values = pooled_dimension(codes, k)
    counts, edges = np.histogram(values, bins=bins, range=value_range)
    return Histogram(edges, counts.astype(np.int64), k, codes[0].space.value)
