"""Departure-time scheduling that maximizes platooning fuel savings for
vehicles with fixed routes."""

__version__ = "0.1.0"
