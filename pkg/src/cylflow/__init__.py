"""Numerical laboratory for shrinking cylinders under rescaled mean curvature flow."""

__version__ = "0.1.0"
