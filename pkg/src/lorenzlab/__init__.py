"""Finite-truncation laboratory for Lorenz-gauge Dirac-Maxwell dynamics."""

__version__ = "0.1.0"
