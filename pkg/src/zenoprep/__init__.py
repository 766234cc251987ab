"""Simulator and resource estimator for measurement-driven adiabatic
ground-state preparation of the Hubbard model."""

__version__ = "0.1.0"
