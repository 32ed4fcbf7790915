"""Quantum particle in a thermal bath of light particles: collision dynamics and limits."""

__version__ = "0.1.0"
