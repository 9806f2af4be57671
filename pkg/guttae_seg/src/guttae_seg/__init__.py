"""Guttae segmentation on panorama tiles."""

__version__ = "0.1.0"
