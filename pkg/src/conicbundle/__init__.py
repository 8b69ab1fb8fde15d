"""Fibre solubility statistics for conic bundles over P^1."""

__version__ = "0.1.0"
