from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from transport_engine.coefficients import CoefficientPair, line_integral_sigma
from transport_engine.errors import KernelDomainError
from transport_engine.geometry import Domain, LineQuadrature, PhasePoint

BOUNDARY_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class BallisticArrival:
    """The unscattered arrival at an exit (x, v): where it entered, how long it took, what survived."""

    exit_point: NDArray[np.float64]
    direction: NDArray[np.float64]
    entry_point: NDArray[np.float64]
    delay: float
    weight: float


def require_boundary(domain: Domain, point: PhasePoint, outgoing: bool, cutoff: float) -> float:
    """Check that a phase point lies on Gamma_+ (or Gamma_-) away from tangency; returns |nu.v|."""
    if abs(float(domain.level(point.x)) - 1.0) > BOUNDARY_TOLERANCE:
        raise KernelDomainError(f"Point {point.x} is not on the boundary")
    cosine = float(domain.outward_normal(point.x) @ point.v)
    if not outgoing:
        cosine = -cosine
    if cosine < cutoff:
        side = "outgoing" if outgoing else "incoming"
        raise KernelDomainError(
            f"Direction {point.v} at {point.x} is not {side} (nu.v = {cosine:.3e}, cutoff {cutoff})"
        )
    return cosine


def ballistic_kernel(
    pair: CoefficientPair,
    domain: Domain,
    exit: PhasePoint,
    cutoff: float = 1e-6,
    line: Optional[LineQuadrature] = None,
) -> BallisticArrival:
    """Entry point, delay tau_-(x, v) and weight exp(-int sigma) of the ballistic part at an exit."""
    require_boundary(domain, exit, outgoing=True, cutoff=cutoff)
    delay = float(domain.exit_distance(exit.x, -exit.v))
    weight = float(np.exp(-line_integral_sigma(pair, domain, exit.x, exit.v, -delay, 0.0, line=line)))
    return BallisticArrival(
        exit_point=exit.x,
        direction=exit.v,
        entry_point=exit.x - delay * exit.v,
        delay=delay,
        weight=weight,
    )
