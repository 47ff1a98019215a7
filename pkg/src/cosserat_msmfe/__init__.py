"""Vertex-lumped mixed finite element solvers for Cosserat elasticity."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
