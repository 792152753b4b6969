"""Moment Lyapunov exponents of additive functionals of 1D diffusions."""

from .model import SdeModel, build_model, make_model, project_linear_2d
from .rng import RngPolicy

__all__ = ["SdeModel", "build_model", "make_model", "project_linear_2d", "RngPolicy"]
__version__ = "0.1.0"
