"""Whitening-model fitting and the distributional tests used to characterize latent spaces."""

from .whitening import WhiteningAccumulator, WhiteningModel, fit_whitening, fit_whitening_chunks
from .report import TestReport
from .normality import henze_zirkler, mardia, mardia_combined, marginal_normality_scan, principal_axes
from .dip import dip_statistic, dip_test
from .histogram import Histogram, histogram_dimension, pooled_dimension
from .sampling import iter_w_chunks, sample_w_array, sample_w_codes, sample_z

__all__ = [
    "WhiteningAccumulator",
    "WhiteningModel",
    "fit_whitening",
    "fit_whitening_chunks",
    "TestReport",
    "henze_zirkler",
    "mardia",
    "mardia_combined",
    "marginal_normality_scan",
    "principal_axes",
    "dip_statistic",
    "dip_test",
    "Histogram",
    "histogram_dimension",
    "pooled_dimension",
    "iter_w_chunks",
    "sample_w_array",
    "sample_w_codes",
    "sample_z",
]
