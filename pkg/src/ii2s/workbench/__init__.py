"""Command-line workbench and its persistence helpers."""

from .cli import build_parser, main
from .io import CorpusIndex, load_image, open_generator, save_image
from .manifest import RunManifest

__all__ = ["CorpusIndex", "RunManifest", "build_parser", "load_image", "main", "open_generator", "save_image"]
