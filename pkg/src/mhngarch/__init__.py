"""Bivariate affine GARCH with NIG innovations: filtering, estimation, pricing and portfolio tools."""

__version__ = "0.1.0"
