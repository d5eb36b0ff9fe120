"""Radial evolution, diagnostics and static solitons for the equivariant
wave map and Adkins-Nappi equations."""
from .fields import FieldState, RadialGrid, make_grid
from .model import ModelKind

__all__ = ["FieldState", "RadialGrid", "ModelKind", "make_grid"]
__version__ = "0.1.0"
