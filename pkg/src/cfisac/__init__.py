"""Movable-antenna cell-free ISAC lab with PA-distortion-aware robust design."""

__version__ = "0.1.0"
