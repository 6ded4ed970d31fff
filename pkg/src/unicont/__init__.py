"""Numerical experiments on unique continuation for almost-periodic eigenfunction series."""

__version__ = "0.1.0"
