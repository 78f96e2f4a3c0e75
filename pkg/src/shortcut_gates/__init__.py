"""Shortcut-to-adiabatic-passage phase gates in cavity QED."""

__version__ = "0.1.0"
