"""Curvature, geodesic-flow and volume-growth bound toolkit for homogeneous metrics."""

from ._accel import USE_NUMBA
from .errors import GeoboundError

__version__ = "0.1.0"

__all__ = ["USE_NUMBA", "GeoboundError", "__version__"]
