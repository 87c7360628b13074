"""Closed-form collision orders.

Order 0 follows each source particle along its chord. Order 1 integrates the
single-scattering density over the scattering depth, one boundary cell at a
time: for an outgoing direction v the exit point of a scattered particle is a
monotone function of its offset c = z . v_perp, so every boundary cell maps
to one depth interval. Order 2 quadratures the two-collision kernel over the
first-collision depth.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from core.types import SolverBackend
from core.utils import chunked, ordered_map
from transport_engine.coefficients import CoefficientPair, line_integral_sigma
from transport_engine.errors import GeometryError
from transport_engine.forward.backend import ForwardBackend
from transport_engine.forward.response import deposit_arrivals
from transport_engine.forward.source import BoundarySource
from transport_engine.geometry import BoundaryGrid, Domain, LineQuadrature, PhasePoint, gauss_legendre
from transport_engine.kernels import KernelBudget, broken_ray_attenuation, double_scatter_values

logger = logging.getLogger(__name__)

PARALLEL_TOLERANCE = 1e-12
DOUBLE_CHUNK = 64


@dataclass(frozen=True, eq=False)
class Arrivals:
    """Point arrivals on Gamma_+: delay after emission, exit cell and mass."""

    delay: NDArray[np.float64]
    boundary: NDArray[np.int_]
    angle: NDArray[np.int_]
    mass: NDArray[np.float64]

    @classmethod
    def concatenate(cls, parts: list["Arrivals"]) -> "Arrivals":
        if not parts:
            return cls(np.zeros(0), np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))
        return cls(
            np.concatenate([p.delay for p in parts]),
            np.concatenate([p.boundary for p in parts]),
            np.concatenate([p.angle for p in parts]),
            np.concatenate([p.mass for p in parts]),
        )

    @property
    def total(self) -> float:
        return math.fsum(self.mass)

    def deposit(self, grid: BoundaryGrid, source: BoundarySource) -> NDArray[np.float64]:
        masses = np.zeros(grid.shape)
        deposit_arrivals(masses, grid, self.delay, self.boundary, self.angle, self.mass, source.temporal)
        return masses


def _in_window(window: Optional[NDArray[np.bool_]], boundary: NDArray, angle: NDArray) -> NDArray[np.bool_]:
    if window is None:
        return np.ones(np.shape(boundary), dtype=bool)
    return window[boundary, angle]


def ballistic_arrivals(
    pair: CoefficientPair,
    domain: Domain,
    grid: BoundaryGrid,
    points: NDArray[np.float64],
    directions: NDArray[np.float64],
    masses: NDArray[np.float64],
    line: Optional[LineQuadrature] = None,
    window: Optional[NDArray[np.bool_]] = None,
) -> Arrivals:
    """Unscattered arrivals of source particles; weights use the same backward line integral as ballistic_kernel."""
    reach = domain.exit_distance(points, directions)
    exits = points + reach[:, None] * directions
    delay = domain.exit_distance(exits, -directions)
    boundary = grid.boundary_index(exits)
    angle = grid.angle_index(directions)
    exponent = line_integral_sigma(
        pair, domain, exits, directions, -delay, np.zeros_like(delay), line=line, check=False
    )
    keep = _in_window(window, boundary, angle)
    return Arrivals(delay[keep], boundary[keep], angle[keep], (masses * np.exp(-exponent))[keep])


def depth_intervals(
    domain: Domain,
    grid: BoundaryGrid,
    x0: NDArray[np.float64],
    v0: NDArray[np.float64],
    reach: float,
) -> tuple[NDArray[np.int_], NDArray[np.int_], NDArray[np.float64], NDArray[np.float64]]:
    """Depth intervals [s_lo, s_hi] scattering into (boundary cell, angle node), for directions not parallel to v0."""
    a, b = domain.semi_axes
    directions = grid.directions
    boundary_nodes = grid.shape[1]
    half = math.pi / boundary_nodes
    perp = np.stack([-directions[:, 1], directions[:, 0]], axis=-1)
    # the outgoing arc of direction v is centered at the angle of (v_x / a, v_y / b)
    centre = np.arctan2(directions[:, 1] / b, directions[:, 0] / a)
    cells = 2.0 * math.pi * np.arange(boundary_nodes) / boundary_nodes
    relative = np.angle(np.exp(1j * (cells[None, :] - centre[:, None])))
    lower = np.clip(relative - half, -0.5 * math.pi, 0.5 * math.pi)
    upper = np.clip(relative + half, -0.5 * math.pi, 0.5 * math.pi)

    offset_lower = np.sum(domain.boundary_point(centre[:, None] + lower) * perp[:, None, :], axis=-1)
    offset_upper = np.sum(domain.boundary_point(centre[:, None] + upper) * perp[:, None, :], axis=-1)
    start = (perp @ x0)[:, None]
    rate = (perp @ v0)[:, None]
    regular = np.abs(rate) > PARALLEL_TOLERANCE
    safe_rate = np.where(regular, rate, 1.0)
    s_a = (offset_lower - start) / safe_rate
    s_b = (offset_upper - start) / safe_rate
    s_lo = np.clip(np.minimum(s_a, s_b), 0.0, reach)
    s_hi = np.clip(np.maximum(s_a, s_b), 0.0, reach)
    live = (upper > lower) & regular & (s_hi > s_lo)
    angle, boundary = np.nonzero(live)
    return boundary, angle, s_lo[live], s_hi[live]


def _parallel_intervals(
    domain: Domain,
    grid: BoundaryGrid,
    x0: NDArray[np.float64],
    v0: NDArray[np.float64],
    reach: float,
    panel_length: float,
) -> tuple[NDArray[np.int_], NDArray[np.int_], NDArray[np.float64], NDArray[np.float64]]:
    """Directions parallel to v0 keep one exit point for every depth; the chord is split into panels."""
    directions = grid.directions
    parallel = np.nonzero(np.abs(directions[:, 0] * v0[1] - directions[:, 1] * v0[0]) <= PARALLEL_TOLERANCE)[0]
    if parallel.size == 0 or reach <= 0.0:
        empty = np.zeros(0)
        return empty.astype(int), empty.astype(int), empty, empty
    middle = x0 + 0.5 * reach * v0
    exits = middle + domain.exit_distance(middle, directions[parallel])[:, None] * directions[parallel]
    boundary = grid.boundary_index(exits)
    panels = max(1, math.ceil(reach / panel_length))
    edges = np.linspace(0.0, reach, panels + 1)
    return (
        np.repeat(boundary, panels),
        np.repeat(parallel, panels),
        np.tile(edges[:-1], parallel.size),
        np.tile(edges[1:], parallel.size),
    )


def single_scatter_arrivals(
    pair: CoefficientPair,
    domain: Domain,
    grid: BoundaryGrid,
    entry: PhasePoint,
    mass: float,
    depth_nodes: int = 3,
    panel_length: float = 0.5,
    line: Optional[LineQuadrature] = None,
    window: Optional[NDArray[np.bool_]] = None,
) -> Arrivals:
    """Single-scattered arrivals of one source particle, integrated exactly per boundary cell in depth."""
    x0, v0 = entry.x, entry.v
    reach = float(domain.exit_distance(x0, v0))
    regular = depth_intervals(domain, grid, x0, v0, reach)
    parallel = _parallel_intervals(domain, grid, x0, v0, reach, panel_length)
    boundary, angle, s_lo, s_hi = (np.concatenate(pieces) for pieces in zip(regular, parallel))
    keep = _in_window(window, boundary, angle)
    boundary, angle, s_lo, s_hi = boundary[keep], angle[keep], s_lo[keep], s_hi[keep]

    nodes, weights = gauss_legendre(depth_nodes)
    length = (s_hi - s_lo)[:, None]
    s = s_lo[:, None] + length * nodes[None, :]
    v = np.broadcast_to(grid.directions[angle][:, None, :], s.shape + (2,))
    turn = x0 + s[..., None] * v0
    kernel = pair.kappa_at(turn, v0, v)
    attenuation, exit_length = broken_ray_attenuation(pair, domain, x0, v0, s, v, line)
    quad = mass * grid.angle_weights[angle][:, None] * length * weights[None, :]
    return Arrivals(
        delay=(s + exit_length).ravel(),
        boundary=np.repeat(boundary, depth_nodes),
        angle=np.repeat(angle, depth_nodes),
        mass=(quad * kernel * attenuation).ravel(),
    )


def double_scatter_masses(
    pair: CoefficientPair,
    domain: Domain,
    grid: BoundaryGrid,
    entry: PhasePoint,
    emission_time: float,
    mass: float = 1.0,
    depth_nodes: int = 8,
    panel_length: float = 0.5,
    tube: float = 1e-4,
    line: Optional[LineQuadrature] = None,
    window: Optional[NDArray[np.bool_]] = None,
    threads: Optional[int] = None,
) -> NDArray[np.float64]:
    """Two-collision cell masses for a unit point source at ``entry`` emitting at ``emission_time``.

    u(t, x, v) = int_0^{tau_+} exp(-int_0^{s'} sigma) gamma(t - t0 - s', x, v, x' + s' v', v') ds'
    is evaluated at the bin centers and multiplied by dt d xi. Works on
    boundary grids of either dimension.
    """
    reach = float(domain.exit_distance(entry.x, entry.v))
    masses = np.zeros(grid.shape)
    rows, cols = grid.valid_nodes()
    if window is not None:
        keep = window[rows, cols]
        rows, cols = rows[keep], cols[keep]
    if reach <= 0.0 or rows.size == 0:
        return masses

    rule = LineQuadrature(nodes_per_panel=depth_nodes, panels=max(1, math.ceil(reach / panel_length)))
    unit_nodes, unit_weights = rule.rule
    depths = reach * unit_nodes
    first_leg = line_integral_sigma(
        pair, domain, entry.x, entry.v, np.zeros_like(depths), depths, line=line, check=False
    )
    depth_weights = reach * unit_weights * np.exp(-first_leg)
    collisions = entry.x + depths[:, None] * entry.v
    tau = (grid.time_centers - emission_time)[:, None, None] - depths[None, None, :]

    def evaluate(chunk: slice) -> NDArray[np.float64]:
        x = grid.points[rows[chunk]][None, :, None, :]
        v = grid.directions[cols[chunk]][None, :, None, :]
        evaluation = double_scatter_values(
            pair, domain, tau, x, v, collisions[None, None, :, :], entry.v, tube=tube, line=line
        )
        return evaluation.finite_values() @ depth_weights

    flux = np.concatenate(ordered_map(evaluate, chunked(rows.size, DOUBLE_CHUNK), threads), axis=1)
    measure = grid.xi_weights[rows, cols][None, :] * grid.time_widths[:, None]
    masses[:, rows, cols] = mass * flux * measure
    return masses


class ClosedFormBackend(ForwardBackend):
    """Orders 0 to 2 in closed form; everything above is carried by the tail bound."""

    backend = SolverBackend.CLOSED_FORM
    max_order = 3

    def check_order(self, order: int) -> None:
        if order < 0:
            raise ValueError(f"Truncation order must be nonnegative, got {order}")
        if order > self.max_order:
            raise ValueError(
                f"The closed-form backend supports N <= {self.max_order}, got N = {order}; use the picard backend"
            )

    def compute(
        self,
        source: BoundarySource,
        grid: BoundaryGrid,
        order: int,
        window: Optional[NDArray[np.bool_]] = None,
    ) -> dict[int, NDArray[np.float64]]:
        self.check_order(order)
        if grid.domain.dimension != 2:
            raise GeometryError("Closed-form responses are binned on planar grids; use double_scatter_masses in d = 3")
        particles = source.particles()
        masses = {
            0: ballistic_arrivals(
                self.pair,
                self.domain,
                grid,
                particles.points,
                particles.directions,
                particles.masses,
                line=self.line,
                window=window,
            ).deposit(grid, source)
        }
        logger.debug(f"Ballistic mass {math.fsum(masses[0].ravel()):.8g} from {len(particles)} particles")
        if order >= 1:
            masses[1] = self._single(source, grid, window)
        if order >= 2:
            masses[2] = self._double(source, grid, window)
        return masses

    def _single(
        self, source: BoundarySource, grid: BoundaryGrid, window: Optional[NDArray[np.bool_]]
    ) -> NDArray[np.float64]:
        if self.pair.kappa_vanishes:
            return np.zeros(grid.shape)
        particles = source.particles()

        def scatter(index: int) -> Arrivals:
            return single_scatter_arrivals(
                self.pair,
                self.domain,
                grid,
                PhasePoint(particles.points[index], particles.directions[index]),
                float(particles.masses[index]),
                depth_nodes=self.quadrature.depth_nodes,
                panel_length=self.quadrature.ray_panel_length,
                line=self.line,
                window=window,
            )

        arrivals = Arrivals.concatenate(ordered_map(scatter, range(len(particles)), self.threads))
        logger.debug(f"Single-scatter mass {arrivals.total:.8g} over {arrivals.mass.size} depth nodes")
        return arrivals.deposit(grid, source)

    def _double(
        self, source: BoundarySource, grid: BoundaryGrid, window: Optional[NDArray[np.bool_]]
    ) -> NDArray[np.float64]:
        if self.pair.kappa_vanishes:
            return np.zeros(grid.shape)
        centroid = source.centroid()
        return double_scatter_masses(
            self.pair,
            self.domain,
            grid,
            centroid,
            emission_time=source.temporal.centroid,
            mass=source.incoming_mass,
            depth_nodes=self.kernels.double_depth_nodes,
            panel_length=self.quadrature.ray_panel_length,
            tube=self.kernels.singular_tube,
            line=self.line,
            window=window,
            threads=self.threads,
        )

    def tail_bound(self, budget: KernelBudget, order: int) -> float:
        return budget.tail_bound(min(order, 2))
