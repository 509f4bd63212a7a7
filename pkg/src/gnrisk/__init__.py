"""Guarantee-network credit risk pipeline."""

__version__ = "0.1.0"
