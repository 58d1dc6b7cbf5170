"""Numerical laboratory for two-phase free boundary problems driven by harmonic measure."""

__version__ = "0.1.0"
