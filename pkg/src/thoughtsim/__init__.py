"""Variance-preserving layers, a focus-driven sequence runtime, and
Turing-machine simulation on top of it, with exact and empirical cost
analysis of the simulation algorithms."""

__version__ = "0.1.0"
