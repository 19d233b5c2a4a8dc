"""Solver and verification tools for u_t + f(u)_x = Q(u_x)_x with bounded Q."""

from bfburgers.model import ModelSpec, builtin_model, derive_constants, validate_model
from bfburgers.viscous_solver import Grid, GridField, SolverConfig, solve

__version__ = "0.1.0"

__all__ = ["ModelSpec", "builtin_model", "derive_constants", "validate_model",
           "Grid", "GridField", "SolverConfig", "solve", "__version__"]
