"""Frozen-CNN feature extraction from image folders to CSV."""

from .backbone import FEATURE_DIM, build_backbone
from .errors import ExtractError
from .extract import ExtractionManifest, extract, scan_images

__all__ = [
    "FEATURE_DIM",
    "ExtractError",
    "ExtractionManifest",
    "build_backbone",
    "extract",
    "scan_images",
]
