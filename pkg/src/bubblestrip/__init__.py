"""Numerical toolkit for single-bubble solutions of a coupled critical system on a periodic strip."""

__version__ = "0.1.0"
