"""Φ-variation of Hermite processes: variation functions, metric entropy,
series conditions, kernel constants, path simulation and grid functionals."""

__version__ = "0.1.0"
