"""Dual-branch weakly supervised video anomaly detection with cross pseudo labels."""

from .cli import main

__version__ = "0.1.0"
__all__ = ["main"]
