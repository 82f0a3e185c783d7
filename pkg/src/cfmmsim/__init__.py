"""N-asset constant-function market maker simulation."""

__version__ = "0.1.0"
