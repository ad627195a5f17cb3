"""Numerical tools for freeness with amalgamation over the diagonal of random matrices."""

__version__ = "0.1.0"
