"""Reduced axisymmetric Navier-Stokes solver on a ring cylinder."""

__version__ = "0.1.0"
