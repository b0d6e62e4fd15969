"""Measurement-complexity analysis and simulation of iterative phase estimation."""

__version__ = "0.1.0"
