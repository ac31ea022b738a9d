"""Achievable rates and cut-set bounds for Gaussian half-duplex relay networks."""
__version__ = "1.0.0"
