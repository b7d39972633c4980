"""Image-to-latent embedding for style-based generators with a whitened-space regularizer."""

from .conditions import ConditionFn
from .editing import EditDirection, lerp, pca_edit, style_mix, style_transfer
from .errors import (
    DivergedError,
    II2SError,
    IncompatibleArtifactError,
    InvalidInputError,
    InvalidModelError,
    RankDeficiencyError,
    StaleCodeError,
    UnsupportedCheckpointError,
)
from .generator import GeneratorHandle, NoisePolicy, ToyConfig, load_pretrained, make_toy_generator, synthesize
from .inversion import InversionConfig, InversionResult, invert, invert_batch, invert_conditional
from .latent_spaces import PnPlusCode, Space, WCode, WPlusCode, ZCode, pnplus_to_wplus, wplus_to_pnplus
from .losses import LossWeights, total_loss
from .metrics import GaussianMoments, MetricReport, fid, psnr, rmse, ssim
from .stats import WhiteningModel, fit_whitening

__all__ = [
    "ConditionFn",
    "DivergedError",
    "EditDirection",
    "GaussianMoments",
    "GeneratorHandle",
    "II2SError",
    "IncompatibleArtifactError",
    "InvalidInputError",
    "InvalidModelError",
    "InversionConfig",
    "InversionResult",
    "LossWeights",
    "MetricReport",
    "NoisePolicy",
    "PnPlusCode",
    "RankDeficiencyError",
    "Space",
    "StaleCodeError",
    "ToyConfig",
    "UnsupportedCheckpointError",
    "WCode",
    "WPlusCode",
    "WhiteningModel",
    "ZCode",
    "fid",
    "fit_whitening",
    "invert",
    "invert_batch",
    "invert_conditional",
    "lerp",
    "load_pretrained",
    "make_toy_generator",
    "pca_edit",
    "pnplus_to_wplus",
    "psnr",
    "rmse",
    "ssim",
    "style_mix",
    "style_transfer",
    "synthesize",
    "total_loss",
    "wplus_to_pnplus",
]
