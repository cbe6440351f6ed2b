"""Simulation and analysis of classical-channel-free steering experiments
with energy- and polarization-entangled photon pairs."""

__version__ = "0.1.0"
