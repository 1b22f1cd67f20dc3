"""Conversions between ReLU and threshold networks, hidden-layer compression, and training experiments."""

__version__ = "0.1.0"
