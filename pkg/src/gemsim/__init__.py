"""Gradient echo memory image storage simulator."""

__version__ = "0.1.0"
