"""Mixtures of mirrored Weibull distributions for Value-at-Risk."""
__version__ = "0.1.0"
