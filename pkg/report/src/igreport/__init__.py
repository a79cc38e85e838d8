"""Offline report generation for igplan run and sweep directories."""

__version__ = "0.1.0"
