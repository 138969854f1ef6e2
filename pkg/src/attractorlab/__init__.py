"""Numerical laboratory for internal-wave attractors and degree-0 Hamiltonians."""

__version__ = "0.1.0"
