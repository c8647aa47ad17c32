"""Batch export of model outputs into the tensor container consumed by
the segmentation pipeline's oracle backend."""

__version__ = "0.1.0"
