"""Desk-scale one-shot DMET with classical and simulated-quantum fragment solvers."""

__version__ = "0.1.0"
