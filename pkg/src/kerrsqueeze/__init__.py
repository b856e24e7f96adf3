"""Quantum noise of a two-pump Kerr cavity with a Laguerre-Gauss signal pair."""
__version__ = "0.1.0"
