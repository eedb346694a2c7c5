"""Vertiport location and capacity selection on hybrid air-ground networks."""

__version__ = "0.1.0"
