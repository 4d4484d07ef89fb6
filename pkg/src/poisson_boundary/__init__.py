"""Estimation of the boundary of a Poisson point process from cell maxima."""

__version__ = "0.1.0"
