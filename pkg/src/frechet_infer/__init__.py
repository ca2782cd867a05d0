"""Global Fréchet regression with significance tests for metric-space responses."""

__version__ = "0.1.0"
