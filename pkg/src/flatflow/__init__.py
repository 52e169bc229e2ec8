"""Flat surfaces from glued polygons: holonomy, covers, geodesic and billiard flow."""
from .errors import FlatflowError
from .surface import FlatSurface, Tolerances, load_surface, parse_surface, validate
from .turns import OrthogonalPart, RationalTurn

__version__ = "0.1.0"

__all__ = [
    "FlatflowError",
    "FlatSurface",
    "OrthogonalPart",
    "RationalTurn",
    "Tolerances",
    "load_surface",
    "parse_surface",
    "validate",
]
