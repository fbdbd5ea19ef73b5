"""Thin-layer membrane diffusion laboratory."""

__version__ = "0.3.0"
