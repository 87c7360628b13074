"""Transport lab type definitions."""

from enum import Enum


class DomainKind(str, Enum):
    """Supported convex domains with closed-form ray intersection."""

    UNIT_DISK = "unit-disk"
    UNIT_BALL = "unit-ball"
    ELLIPSE = "ellipse"


class RaySign(str, Enum):
    """Direction along which an exit time is measured (x + s v or x - s v)."""

    PLUS = "+"
    MINUS = "-"


class BoundarySign(str, Enum):
    """Incoming (Gamma-) or outgoing (Gamma+) part of the phase-space boundary."""

    INCOMING = "incoming"
    OUTGOING = "outgoing"


class IntegrationRoute(str, Enum):
    """Quadrature route for phase-space integrals."""

    VOLUME = "volume"
    BOUNDARY_INCOMING = "boundary-"
    BOUNDARY_OUTGOING = "boundary+"


class ResponsePart(str, Enum):
    """Collision-order parts of an outgoing response."""

    BALLISTIC = "ballistic"
    SINGLE = "single"
    DOUBLE = "double"
    BOUND = "bound"

    @classmethod
    def from_order(cls, order: int) -> "ResponsePart":
        """Map a collision order (0, 1, 2) to its part label."""
        mapping = {0: cls.BALLISTIC, 1: cls.SINGLE, 2: cls.DOUBLE}
        if order not in mapping:
            raise ValueError(f"No part label for collision order {order}, valid orders are {list(mapping)}")
        return mapping[order]


class SolverBackend(str, Enum):
    """Forward solver backends."""

    CLOSED_FORM = "closed-form"  # kernel quadrature per collision order
    PICARD = "picard"  # lattice iteration of the Duhamel formula


class XRayMode(str, Enum):
    """How X-ray transform samples are produced."""

    ANALYTIC = "analytic"
    MEASUREMENT = "measurement"


class FilterWindow(str, Enum):
    """Apodization windows for the ramp filter."""

    RAM_LAK = "ram-lak"
    HANN = "hann"


class ExperimentKind(str, Enum):
    """Pipelines the experiment runner knows how to execute."""

    FORWARD = "forward"
    BALLISTIC_SIGMA = "ballistic-sigma"
    SCATTER_K = "scatter-k"
    STABILITY_POINTWISE = "stability-pointwise"
    STABILITY_SOBOLEV = "stability-sobolev"
    MULTIPLE_TAIL = "multiple-tail"

    @property
    def needs_pair(self) -> bool:
        return self in {
            ExperimentKind.STABILITY_POINTWISE,
            ExperimentKind.STABILITY_SOBOLEV,
        }

    @property
    def needs_double_horizon(self) -> bool:
        """Whether the pipeline relies on single-scatter arrivals (T > 2 diam)."""
        return self is not ExperimentKind.BALLISTIC_SIGMA
