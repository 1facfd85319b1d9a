"""Quantum Gibbs Lab - numerical laboratory for quantum Gibbs samplers."""

__version__ = "0.1.0"
