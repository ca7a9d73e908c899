"""Symbolic intruder analysis for protocols using collision-prone hash functions."""

__version__ = "0.1.0"
