"""Self-similar one-dimensional potentials and their geometric spectra."""

__version__ = "0.1.0"
