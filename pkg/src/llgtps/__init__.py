"""Tangent plane integrators for Landau-Lifshitz-Gilbert dynamics and eddy-current coupling."""

__version__ = "0.1.0"
