"""Pseudo-spectral solver and estimate-verification harness for the diffusive
3D Burgers equations with periodic boundary conditions."""

__version__ = "0.1.0"
