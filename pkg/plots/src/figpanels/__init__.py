"""Render experiment result CSVs into the published figure layouts.

This package consumes only the flat CSV schema written by the simulation
harness; it never imports the simulator.
"""

__version__ = "0.1.0"
