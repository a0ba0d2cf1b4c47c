"""Tabular entropy- and KL-regularized MDP solvers."""

__version__ = "0.1.0"
