"""Detect Ponzi-scheme contracts from their transaction histories."""

__version__ = "0.1.0"
