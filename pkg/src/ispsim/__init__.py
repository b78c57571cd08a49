"""Simulation and classical-control design toolkit for a two-axis
inertially stabilised platform."""

__version__ = "0.1.0"
