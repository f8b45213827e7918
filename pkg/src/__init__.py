"""Resonant-exchange scattering toolkit"""

__version__ = "0.1.0"
