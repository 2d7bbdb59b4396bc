"""Numerical laboratory for quantum time-of-arrival distributions."""
__version__ = "0.1.0"
