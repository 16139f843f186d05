"""Gradient attribution extraction for encoder-decoder MT models."""

__version__ = "0.1.0"
