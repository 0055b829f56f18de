"""Posted-price path selection on line and tree networks: online mechanism,
offline optima, competitive-ratio reference curves, and the congestion-cost
pricing ODE, with an experiment harness that writes flat CSV results."""

__version__ = "0.1.0"
