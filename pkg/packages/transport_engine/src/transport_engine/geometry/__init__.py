"""Convex-domain ray geometry: exit times, chords, boundary grids and quadratures."""

from .domain import Domain, PhasePoint, exit_time, segment_indicator
from .grid import BoundaryGrid
from .integrals import PhaseField, phase_space_integral
from .quadrature import LineQuadrature, SphereRule, SurfaceRule, VolumeRule, gauss_legendre

__all__ = [
    "BoundaryGrid",
    "Domain",
    "LineQuadrature",
    "PhaseField",
    "PhasePoint",
    "SphereRule",
    "SurfaceRule",
    "VolumeRule",
    "exit_time",
    "gauss_legendre",
    "phase_space_integral",
    "segment_indicator",
]
