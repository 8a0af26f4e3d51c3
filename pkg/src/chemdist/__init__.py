"""Geometry of critical percolation crossings, arm events and shortcuts."""
__version__ = "0.1.0"
