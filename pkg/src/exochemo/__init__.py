"""Verification toolkit for the 1D exogenous chemotaxis system."""
from .grid import Field, Grid, antiderivative, derivative, integrate, norms
from .kernels import BACKEND

__version__ = "0.1.0"
