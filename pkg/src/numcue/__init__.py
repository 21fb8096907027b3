"""Dot-comparison uncertainty study platform."""

__version__ = "0.1.0"
