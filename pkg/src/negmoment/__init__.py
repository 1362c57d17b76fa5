"""Randomized-measurement estimation of negativity and purity moments."""

__version__ = "0.1.0"
