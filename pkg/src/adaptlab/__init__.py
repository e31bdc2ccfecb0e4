"""Adaptive-control laboratory: excitation, invariant regions and settling diagnostics."""

__version__ = "0.1.0"
