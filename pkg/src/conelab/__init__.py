"""Tangent cones, densities and regularity verdicts for singular points of
real algebraic curves and surfaces."""

__version__ = "0.1.0"
