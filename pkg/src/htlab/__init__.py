"""Numerical laboratory for spectral multipliers of sublaplacians on Heisenberg-type groups."""

__version__ = "0.1.0"
