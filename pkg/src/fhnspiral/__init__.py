"""FitzHugh-Nagumo wave simulation with sparse front-position feedback."""

__version__ = "0.1.0"
