"""Quantum models of stochastic processes with probabilistic error cancellation."""

__version__ = "0.1.0"
