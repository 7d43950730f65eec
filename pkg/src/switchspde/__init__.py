"""Simulation and stability analysis for switching-diffusion SPDEs with jumps."""

__version__ = "0.1.0"
