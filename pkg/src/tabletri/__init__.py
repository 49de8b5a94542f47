"""Server-side style triangle counting over a sorted key-value tablet engine."""

__version__ = "0.1.0"
