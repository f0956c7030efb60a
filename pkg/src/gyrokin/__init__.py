"""Gyroaveraged collision operators in reduced guiding-center coordinates."""

__version__ = "0.1.0"
