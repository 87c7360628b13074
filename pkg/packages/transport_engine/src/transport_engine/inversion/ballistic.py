"""Ballistic extraction: the surviving fraction exp(-int sigma) of one chord.

A mollified source centered at (x'0, v'0) sends its unscattered mass through
the conjugate exit cells at t ~ tau_+(x'0, v'0). Gating the response in time
around that arrival and in space to those cells, then dividing by the incoming
mass, recovers the attenuation of the chord up to the scattered mass that
lands in the same gate.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from transport_engine.errors import KernelDomainError, ReconstructionError
from transport_engine.forward import AlbedoResponse, BoundarySource, ForwardSolver
from transport_engine.geometry import BoundaryGrid, PhasePoint
from transport_engine.kernels import require_boundary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BallisticExtraction:
    """Gated estimate of exp(-int_0^{tau_+} sigma(x'0 + s v'0) ds)."""

    value: float
    contamination: float
    gate: tuple[float, float]
    travel_time: float
    epsilon1: float
    epsilon2: float
    cells: int

    @property
    def exponent(self) -> float:
        """-log(value); infinite when nothing came through."""
        return -math.log(self.value) if self.value > 0.0 else math.inf


@dataclass(frozen=True)
class RichardsonEstimate:
    """Extrapolated limit of a refinement ladder and its successive decrements."""

    limit: float
    values: tuple[float, ...]
    decrements: tuple[float, ...]
    ratio: float
    rate: float

    @property
    def contracting(self) -> bool:
        """Decrements shrink along the ladder."""
        return all(b <= a * (1.0 + 1e-9) + 1e-15 for a, b in zip(self.decrements, self.decrements[1:]))


def _source_of(response: AlbedoResponse, entry: PhasePoint, nodes: int) -> BoundarySource:
    described = response.source
    if described.get("kind") != "mollified" or described.get("epsilon2") is None:
        raise ReconstructionError("The response does not record a mollified source; pass the source explicitly")
    return BoundarySource.mollified(
        response.grid.domain,
        entry,
        float(described.get("epsilon1") or 0.0),
        float(described["epsilon2"]),
        duration=response.source_duration,
        nodes=nodes,
    )


def exit_cells(grid: BoundaryGrid, source: BoundarySource) -> tuple[NDArray[np.bool_], NDArray[np.float64]]:
    """Outgoing cells hit by the unscattered source particles, and each particle's chord time."""
    particles = source.particles()
    domain = grid.domain
    reach = domain.exit_distance(particles.points, particles.directions)
    exits = particles.points + reach[:, None] * particles.directions
    mask = np.zeros(grid.shape[1:], dtype=bool)
    mask[grid.boundary_index(exits), grid.angle_index(particles.directions)] = True
    return mask, reach


def gate_bins(grid: BoundaryGrid, lower: float, upper: float) -> NDArray[np.bool_]:
    """Time bins meeting [lower, upper]."""
    edges = grid.time_edges
    return (edges[1:] > lower) & (edges[:-1] < upper)


def extract_ballistic(
    response: AlbedoResponse,
    entry: PhasePoint,
    source: Optional[BoundarySource] = None,
    gate_cells: int = 1,
    source_nodes: int = 6,
) -> BallisticExtraction:
    """Gated outgoing mass over incoming mass for the source centered at ``entry``.

    The gate has width 2 eps2 + gate_cells dt centered at tau_+(x'0, v'0); it is
    widened to the arrival times of every source particle when the phase
    mollifier spreads them further. The scattered mass inside the gate plus
    the tail bound is reported as contamination.
    """
    grid = response.grid
    domain = grid.domain
    if grid.horizon <= domain.diameter:
        raise ReconstructionError(f"Ballistic extraction needs T > diam(X) = {domain.diameter:g}, got {grid.horizon:g}")
    try:
        require_boundary(domain, entry, outgoing=False, cutoff=max(grid.tangent_cutoff, 1e-6))
    except KernelDomainError as e:
        raise ReconstructionError(f"Near-tangent or invalid entry ray: {str(e)}") from e

    source = source or _source_of(response, entry, source_nodes)
    if response.incoming_mass <= 0.0:
        raise ReconstructionError("The response carries no incoming mass")
    travel_time = float(domain.exit_distance(entry.x, entry.v))
    width = source.temporal.width
    epsilon2 = float(response.source.get("epsilon2") or width)
    half = epsilon2 + 0.5 * gate_cells * grid.dt
    cells, delays = exit_cells(grid, source)
    lower = min(travel_time - half, float(np.min(delays)) - 0.5 * gate_cells * grid.dt)
    upper = max(travel_time + half, float(np.max(delays)) + width + 0.5 * gate_cells * grid.dt)
    if lower < 0.0 or upper > grid.horizon:
        raise ReconstructionError(
            f"Time gate [{lower:.4g}, {upper:.4g}] leaves the observation window (0, {grid.horizon:g})"
        )

    bins = gate_bins(grid, lower, upper)
    gate = bins[:, None, None] & cells[None, :, :]
    total = math.fsum(response.total()[gate])
    scattered = math.fsum((response.total() - response.part(0))[gate])
    value = total / response.incoming_mass
    contamination = scattered / response.incoming_mass + response.tail_bound
    logger.debug(
        f"Ballistic gate [{lower:.4f}, {upper:.4f}] over {int(cells.sum())} cells: value {value:.8g}, "
        f"contamination {contamination:.3g}"
    )
    return BallisticExtraction(
        value=value,
        contamination=contamination,
        gate=(lower, upper),
        travel_time=travel_time,
        epsilon1=source.epsilon if source.phase is not None else math.nan,
        epsilon2=epsilon2,
        cells=int(cells.sum()),
    )


def richardson_limit(values: Sequence[float], ratio: float = 2.0, rate: float = 1.0) -> RichardsonEstimate:
    """Extrapolate a ladder refined by ``ratio`` per rung with error ~ h^rate.

    L = v_fine + (v_fine - v_coarse) / (ratio^rate - 1) from the last two rungs.
    """
    values = tuple(float(v) for v in values)
    if not values:
        raise ReconstructionError("Richardson extrapolation needs at least one value")
    if ratio <= 1.0 or rate <= 0.0:
        raise ValueError(f"Refinement ratio must exceed 1 and rate be positive, got {ratio}, {rate}")
    decrements = tuple(abs(b - a) for a, b in zip(values, values[1:]))
    if len(values) == 1:
        limit = values[0]
    else:
        limit = values[-1] + (values[-1] - values[-2]) / (ratio**rate - 1.0)
    return RichardsonEstimate(limit=limit, values=values, decrements=decrements, ratio=ratio, rate=rate)


def ballistic_ladder(
    solver: ForwardSolver,
    entry: PhasePoint,
    horizon: float,
    ladder: Sequence[float],
    duration: float,
    order: int = 0,
    gate_cells: int = 1,
) -> tuple[list[BallisticExtraction], RichardsonEstimate]:
    """Extract along a mollifier ladder eps1 = eps2 (coarse to fine) and extrapolate the limit."""
    ladder = sorted(ladder, reverse=True)
    extractions = []
    for epsilon in ladder:
        source = BoundarySource.mollified(
            solver.domain, entry, epsilon, epsilon, duration, nodes=solver.quadrature.source_nodes
        )
        response = solver.solve(source, horizon, order=order)
        extractions.append(extract_ballistic(response, entry, source=source, gate_cells=gate_cells))
    ratio = ladder[-2] / ladder[-1] if len(ladder) > 1 else 2.0
    estimate = richardson_limit([e.value for e in extractions], ratio=ratio, rate=2.0)
    logger.info(f"Ballistic ladder {ladder}: values {estimate.values}, limit {estimate.limit:.8g}")
    return extractions, estimate
