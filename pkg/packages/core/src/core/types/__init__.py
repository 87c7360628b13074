"""Core type definitions."""

from .transport import (
    BoundarySign,
    DomainKind,
    ExperimentKind,
    FilterWindow,
    IntegrationRoute,
    RaySign,
    ResponsePart,
    SolverBackend,
    XRayMode,
)

__all__ = [
    "BoundarySign",
    "DomainKind",
    "ExperimentKind",
    "FilterWindow",
    "IntegrationRoute",
    "RaySign",
    "ResponsePart",
    "SolverBackend",
    "XRayMode",
]
