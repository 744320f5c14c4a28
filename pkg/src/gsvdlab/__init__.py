"""Generalized SVD of nonlinear maps: construction, SVDNet, traversal, attacks."""

__version__ = "0.1.0"
