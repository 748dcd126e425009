"""Rearrangements, rises and actions between potentials in a toric model."""

__version__ = "0.1.0"
