"""Dense simulator for digital open-system quantum simulation with trapped ions."""

__version__ = "0.1.0"
