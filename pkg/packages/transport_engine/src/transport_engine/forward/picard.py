"""Picard iteration of the Duhamel formula on a (t, x, v) lattice, d = 2.

u_0 = G_-(t) phi and, for n >= 1,

    (d/dt + v.grad + sigma) u_n = A_2 u_{n-1},  u_n = 0 on Gamma_-,  u_n(0) = 0.

Order 0 is the particle deposit of the closed-form backend, so both backends
share their ballistic part exactly. Orders n >= 1 advance together with
semi-Lagrangian steps along the characteristics (trapezoidal gain, midpoint
absorption). Their outgoing trace is read off by bilinear interpolation at
the boundary nodes. The lattice is slow and low order; it validates the
closed-form orders, it does not replace them.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from core.types import SolverBackend
from transport_engine.errors import GeometryError
from transport_engine.forward.backend import ForwardBackend
from transport_engine.forward.closed_form import ballistic_arrivals
from transport_engine.forward.operators import kernel_matrix, lifting_factors
from transport_engine.forward.source import BoundarySource
from transport_engine.geometry import BoundaryGrid, Domain
from transport_engine.kernels import KernelBudget

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Lattice:
    """Square node lattice covering the domain with a margin."""

    axis: NDArray[np.float64]
    spacing: float
    points: NDArray[np.float64]
    inside: NDArray[np.bool_]

    @classmethod
    def covering(cls, domain: Domain, nodes: int, padding: float = 0.1) -> "Lattice":
        half = max(domain.semi_axes) * (1.0 + padding)
        axis = np.linspace(-half, half, nodes)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        points = np.stack([xx, yy], axis=-1)
        return cls(axis=axis, spacing=float(axis[1] - axis[0]), points=points, inside=domain.contains(points))

    def fractional_index(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return (np.asarray(x, dtype=float) - self.axis[0]) / self.spacing


class PicardBackend(ForwardBackend):
    """Any truncation order, mollified or tabulated sources only."""

    backend = SolverBackend.PICARD

    def check_order(self, order: int) -> None:
        if order < 0:
            raise ValueError(f"Truncation order must be nonnegative, got {order}")

    def _require_supported(self, source: BoundarySource, grid: BoundaryGrid) -> None:
        if grid.domain.dimension != 2:
            raise GeometryError("The lattice backend runs in d = 2 only")
        if source.phase is not None and source.phase.is_point:
            raise GeometryError("The lattice backend needs a source with a pointwise density (eps1 > 0)")

    def compute(
        self,
        source: BoundarySource,
        grid: BoundaryGrid,
        order: int,
        window: Optional[NDArray[np.bool_]] = None,
    ) -> dict[int, NDArray[np.float64]]:
        self.check_order(order)
        self._require_supported(source, grid)
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
        if order == 0:
            return masses
        if self.pair.kappa_vanishes:
            masses.update({n: np.zeros(grid.shape) for n in range(1, order + 1)})
            return masses

        rows, cols = grid.valid_nodes()
        if window is not None:
            keep = window[rows, cols]
            rows, cols = rows[keep], cols[keep]
        measure = grid.time_widths[:, None] * grid.xi_weights[rows, cols][None, :]
        traces = self._march(source, grid, order, rows, cols)
        centers = grid.time_centers / self._step(grid)
        lower = np.minimum(np.floor(centers).astype(int), self.solver.lattice_time_steps - 1)
        fraction = (centers - lower)[:, None]
        for n in range(1, order + 1):
            values = traces[n][lower] * (1.0 - fraction) + traces[n][lower + 1] * fraction
            masses[n] = np.zeros(grid.shape)
            masses[n][:, rows, cols] = np.maximum(values, 0.0) * measure
        return masses

    def _step(self, grid: BoundaryGrid) -> float:
        return grid.horizon / self.solver.lattice_time_steps

    def _march(
        self,
        source: BoundarySource,
        grid: BoundaryGrid,
        order: int,
        rows: NDArray[np.int_],
        cols: NDArray[np.int_],
    ) -> dict[int, NDArray[np.float64]]:
        """Outgoing traces of orders 1..order at every lattice time, shape (steps + 1, len(rows))."""
        lattice = Lattice.covering(self.domain, self.solver.lattice_nodes)
        sphere = grid.sphere
        directions = sphere.directions
        steps = self.solver.lattice_time_steps
        dt = self._step(grid)
        shape = lattice.inside.shape + (sphere.size,)
        logger.info(f"Picard lattice {shape} with {steps} steps up to order {order}")

        interior = lattice.points[lattice.inside]
        back, amplitude = lifting_factors(
            self.pair, self.domain, source, interior[:, None, :], directions[None, :, :], line=self.line
        )
        kernel = kernel_matrix(self.pair, interior, sphere)
        midpoints = lattice.points[:, :, None, :] - 0.5 * dt * directions
        sigma = np.where(self.domain.contains(midpoints), self.pair.sigma_at(midpoints), 0.0)
        decay = np.exp(-sigma * dt)
        shifts = dt * directions / lattice.spacing

        index = lattice.fractional_index(grid.points[rows])
        coordinates = np.stack([index[:, 0], index[:, 1], cols.astype(float)])

        def ballistic(t: float) -> NDArray[np.float64]:
            field = np.zeros(shape)
            field[lattice.inside] = amplitude * source.temporal(t - back)
            return field

        def gain(field: NDArray[np.float64]) -> NDArray[np.float64]:
            result = np.zeros(shape)
            result[lattice.inside] = np.einsum("pab,pa->pb", kernel, field[lattice.inside])
            return result

        def stream(field: NDArray[np.float64]) -> NDArray[np.float64]:
            moved = np.empty_like(field)
            for j in range(sphere.size):
                moved[:, :, j] = ndimage.shift(field[:, :, j], shifts[j], order=1, mode="constant", cval=0.0)
            return moved

        fields = {n: np.zeros(shape) for n in range(1, order + 1)}
        gains = {n: np.zeros(shape) for n in range(1, order + 1)}
        traces = {n: np.zeros((steps + 1, rows.size)) for n in range(1, order + 1)}
        below = ballistic(0.0)
        for n in range(1, order + 1):
            gains[n] = gain(below)
            below = fields[n]

        for m in range(steps):
            below = ballistic((m + 1) * dt)
            for n in range(1, order + 1):
                fresh = gain(below)
                fields[n] = decay * stream(fields[n] + 0.5 * dt * gains[n]) + 0.5 * dt * fresh
                gains[n] = fresh
                below = fields[n]
                traces[n][m + 1] = ndimage.map_coordinates(fields[n], coordinates, order=1, mode="constant")
        total = {n: math.fsum(traces[n].sum(axis=1)) for n in traces}
        logger.debug(f"Lattice trace sums per order: {total}")
        return traces

    def tail_bound(self, budget: KernelBudget, order: int) -> float:
        return budget.tail_bound(order)
