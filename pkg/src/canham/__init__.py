"""Genus-g comparison surfaces in S^3 with Willmore energy below 8 pi."""

__version__ = "0.1.0"
