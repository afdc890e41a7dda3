"""Robust partitioning and operation of networked microgrids."""

__version__ = "0.1.0"
