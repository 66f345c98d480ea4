"""Solvers for finite-horizon robust Markov games with TV uncertainty."""

__version__ = "0.1.0"
