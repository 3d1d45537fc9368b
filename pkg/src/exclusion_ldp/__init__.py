"""Boundary-driven gradient exclusion process: simulation, PDE solvers and rate functionals."""
from .model import ModelParams

__version__ = "0.1.0"

__all__ = ["ModelParams", "__version__"]
