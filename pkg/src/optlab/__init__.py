"""Stochastic optimization methods, weakly convex stationarity tools and an
empirical verifier for unified convergence conditions."""

__version__ = "0.1.0"
