"""Neutralized Bowen entropy on symbolic systems."""
__version__ = "0.1.0"
