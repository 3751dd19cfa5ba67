"""Top-level package for the Sampled-Data Stochastic Control Toolkit."""

__version__ = '0.2.0'
