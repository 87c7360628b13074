"""Phase-space integrals over X x S^{d-1}.

Two routes compute the same number:
- volume: tensor quadrature of f over X times the sphere
- boundary: integrate along every chord from Gamma_- (or back from Gamma_+)
  and weight the chord integrals with d xi
"""

import logging
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from core.types import BoundarySign, IntegrationRoute
from transport_engine.errors import NumericalGuardError
from transport_engine.geometry.domain import Domain
from transport_engine.geometry.grid import BoundaryGrid
from transport_engine.geometry.quadrature import LineQuadrature, SphereRule, VolumeRule

logger = logging.getLogger(__name__)

PhaseField = Callable[[NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]


def _guard(values: NDArray[np.float64], route: IntegrationRoute) -> NDArray[np.float64]:
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise NumericalGuardError(f"{int(np.sum(bad))} non-finite integrand samples on the {route.value} route")
    return values


def phase_space_integral(
    f: PhaseField,
    domain: Domain,
    route: IntegrationRoute = IntegrationRoute.VOLUME,
    radial_nodes: int = 48,
    boundary_nodes: int = 128,
    angle_nodes: int = 256,
    line: LineQuadrature | None = None,
) -> float:
    """Integral of f(x, v) over X x S^{d-1} by the chosen route."""
    route = IntegrationRoute(route)
    if route is IntegrationRoute.VOLUME:
        volume = VolumeRule.build(domain, radial_nodes=radial_nodes, angle_nodes=angle_nodes)
        sphere = SphereRule.build(domain.dimension, angle_nodes)
        values = _guard(np.asarray(f(volume.points[:, None, :], sphere.directions[None, :, :]), float), route)
        return float(np.einsum("i,ij,j->", volume.weights, values, sphere.weights))

    sign = BoundarySign.INCOMING if route is IntegrationRoute.BOUNDARY_INCOMING else BoundarySign.OUTGOING
    grid = BoundaryGrid.build(domain, boundary_nodes, angle_nodes, 1, 1.0, sign=sign)
    line = line or LineQuadrature.for_length(domain.diameter)
    unit_nodes, unit_weights = line.rule
    rows, cols = grid.valid_nodes()
    x = grid.points[rows]
    v = grid.directions[cols]
    # from Gamma_- rays run forward, from Gamma_+ they run backward
    step = v if sign is BoundarySign.INCOMING else -v
    lengths = domain.exit_distance(x, step)
    samples = x[:, None, :] + (lengths[:, None] * unit_nodes[None, :])[..., None] * step[:, None, :]
    values = _guard(np.asarray(f(samples, np.broadcast_to(v[:, None, :], samples.shape)), float), route)
    chord_integrals = lengths * (values @ unit_weights)
    total = float(np.sum(chord_integrals * grid.xi_weights[rows, cols]))
    logger.debug(f"Boundary route over {len(rows)} phase nodes: {total:.12g}")
    return total
