"""Chip-package wave propagation: FDTD S-parameters and channel analysis."""

__version__ = "0.1.0"
