"""Finite-difference curvature toolkit for base conformal warped products."""

__version__ = "0.1.0"
