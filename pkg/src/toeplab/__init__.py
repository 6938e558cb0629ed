"""Numerical laboratory for Toeplitz operators on model CR manifolds."""

__version__ = "0.1.0"
