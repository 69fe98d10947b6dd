"""Automatic detection of hydrological corrections in elevation models."""

__version__ = "0.1.0"
