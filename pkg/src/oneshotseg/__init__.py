"""One-shot video object segmentation on a synthetic desk-scale benchmark."""

__version__ = "0.1.0"
