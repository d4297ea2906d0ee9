"""Adaptive many-objective energy management for a PV/battery/diesel microgrid."""

__version__ = "0.1.0"
