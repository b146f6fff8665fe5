"""Single-fractal perturbation datasets and their verification tools."""

__version__ = "0.1.0"
