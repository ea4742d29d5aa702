"""Quasi-static brittle fracture with a cell-centred discrete element method."""

__version__ = "0.1.0"
