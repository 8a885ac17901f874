"""Synthetic wind-power capacity-factor series from gridded reanalysis winds."""

__version__ = "0.1.0"
