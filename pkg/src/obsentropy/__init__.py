"""Observational entropy, continuity certificates, and measurement distances."""

__version__ = "0.1.0"
