"""Style-based generators behind one contract: a toy realization and a pretrained-checkpoint adapter."""

from .handle import (
    GeneratorHandle,
    GeneratorSpec,
    NoisePolicy,
    ToyConfig,
    gradient_of_synthesis,
    load_pretrained,
    make_toy_generator,
    map_z_to_w,
    num_style_layers,
    synthesize,
)

__all__ = [
    "GeneratorHandle",
    "GeneratorSpec",
    "NoisePolicy",
    "ToyConfig",
    "gradient_of_synthesis",
    "load_pretrained",
    "make_toy_generator",
    "map_z_to_w",
    "num_style_layers",
    "synthesize",
]
