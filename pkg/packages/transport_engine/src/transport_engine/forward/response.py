"""Outgoing responses on (0, T) x Gamma_+, split by collision order.

Responses store masses per grid cell: the integral of the outgoing flux u
against dt d xi over one (time bin, boundary cell, angle cell). Densities are
recovered by dividing by the cell measure.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, Mapping, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core.models import GridMetadata, ResponseArtifact
from core.types import BoundarySign, ResponsePart, SolverBackend
from transport_engine.errors import GridMismatchError, NumericalGuardError
from transport_engine.forward.source import BoundarySource, TemporalMollifier
from transport_engine.geometry import BoundaryGrid

logger = logging.getLogger(__name__)

RESPONSE_COLUMNS = ("t", "boundary_index", "angle_index", "order", "value", "mass")


def deposit_arrivals(
    masses: NDArray[np.float64],
    grid: BoundaryGrid,
    delay: ArrayLike,
    boundary_index: ArrayLike,
    angle_index: ArrayLike,
    weight: ArrayLike,
    temporal: TemporalMollifier,
) -> None:
    """Add arrivals emitted with profile g and delayed by ``delay`` to ``masses`` in place.

    An arrival occupies [delay, delay + width]; every time bin receives the
    exact overlap int g(t - delay) dt over the bin. Mass arriving after T is
    outside the observation window and dropped.
    """
    delay = np.atleast_1d(np.asarray(delay, dtype=float))
    if delay.size == 0:
        return
    boundary_index = np.broadcast_to(np.asarray(boundary_index), delay.shape)
    angle_index = np.broadcast_to(np.asarray(angle_index), delay.shape)
    weight = np.broadcast_to(np.asarray(weight, dtype=float), delay.shape)

    edges = grid.time_edges
    first = np.floor(delay / grid.dt).astype(int)
    span = int(math.ceil(temporal.width / grid.dt)) + 1
    bins = first[:, None] + np.arange(span)[None, :]
    inside = (bins >= 0) & (bins < grid.time_bins)
    clipped = np.clip(bins, 0, grid.time_bins - 1)
    overlap = temporal.cdf(edges[clipped + 1] - delay[:, None]) - temporal.cdf(edges[clipped] - delay[:, None])
    contribution = np.where(inside, overlap * weight[:, None], 0.0)
    np.add.at(
        masses,
        (clipped.ravel(), np.repeat(boundary_index, span), np.repeat(angle_index, span)),
        contribution.ravel(),
    )


@dataclass(frozen=True, eq=False)
class AlbedoResponse:
    """Outgoing masses per collision order with the run metadata.

    ``masses[n]`` has the grid shape (time bins, boundary nodes, angle nodes).
    ``tail_bound`` bounds the outgoing mass of every order not in ``masses``
    per unit incoming mass.
    """

    grid: BoundaryGrid
    masses: dict[int, NDArray[np.float64]]
    source_duration: float
    order: int
    tail_bound: float
    incoming_mass: float
    backend: SolverBackend = SolverBackend.CLOSED_FORM
    growth_bound: float = math.inf
    window: Optional[NDArray[np.bool_]] = None
    source: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.grid.sign is not BoundarySign.OUTGOING:
            raise GridMismatchError("Responses live on an outgoing boundary grid")
        for n, values in self.masses.items():
            if values.shape != self.grid.shape:
                raise GridMismatchError(f"Order {n} masses have shape {values.shape}, grid is {self.grid.shape}")
        if self.tail_bound < 0.0:
            raise NumericalGuardError(f"Negative tail bound {self.tail_bound}")

    @property
    def orders(self) -> list[int]:
        return sorted(self.masses)

    def part(self, order: int) -> NDArray[np.float64]:
        if order not in self.masses:
            return np.zeros(self.grid.shape)
        return self.masses[order]

    def total(self, max_order: Optional[int] = None) -> NDArray[np.float64]:
        """Cell masses summed over the computed orders up to ``max_order``."""
        orders = [n for n in self.orders if max_order is None or n <= max_order]
        result = np.zeros(self.grid.shape)
        for n in orders:
            result = result + self.masses[n]
        return result

    def density(self, order: Optional[int] = None) -> NDArray[np.float64]:
        """u(t_n, x_i, v_j): cell mass over dt d xi, zero on cells without measure."""
        values = self.total() if order is None else self.part(order)
        measure = self.grid.time_widths[:, None, None] * self.grid.xi_weights[None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(measure > 0.0, values / np.where(measure > 0.0, measure, 1.0), 0.0)

    def mass(self, order: Optional[int] = None) -> float:
        values = self.total() if order is None else self.part(order)
        return math.fsum(values.ravel())

    def masses_by_part(self) -> dict[ResponsePart, float]:
        return {ResponsePart.from_order(n): self.mass(n) for n in self.orders if n <= 2}

    def truncated(self, order: int, tail_bound: float) -> "AlbedoResponse":
        """The same run cut at a lower order, with the tail bound of that order."""
        kept = {n: values for n, values in self.masses.items() if n <= order}
        return replace(self, masses=kept, order=order, tail_bound=tail_bound)

    def difference_norm(self, other: "AlbedoResponse") -> float:
        """L^1((0, T) x Gamma_+) distance of the computed parts, in mass units."""
        if not self.grid.same_discretization(other.grid):
            raise GridMismatchError("Responses were computed on different grids")
        return math.fsum(np.abs(self.total() - other.total()).ravel())

    def to_rows(self) -> Iterator[dict[str, Any]]:
        """Long-format rows (t, boundary_index, angle_index, order, value, mass) for nonzero cells."""
        centers = self.grid.time_centers
        for n in self.orders:
            values = self.masses[n]
            densities = self.density(n)
            for t_index, b_index, a_index in zip(*np.nonzero(values)):
                yield {
                    "t": float(centers[t_index]),
                    "boundary_index": int(b_index),
                    "angle_index": int(a_index),
                    "order": n,
                    "value": float(densities[t_index, b_index, a_index]),
                    "mass": float(values[t_index, b_index, a_index]),
                }

    @classmethod
    def from_rows(
        cls,
        grid: BoundaryGrid,
        rows: Iterable[Mapping[str, Any]],
        artifact: ResponseArtifact,
    ) -> "AlbedoResponse":
        """Rebuild a response from its rows and sidecar; the masses are exact, densities are derived."""
        backend = SolverBackend(artifact.backend)
        explicit = artifact.order if backend is SolverBackend.PICARD else min(artifact.order, 2)
        masses = {n: np.zeros(grid.shape) for n in range(explicit + 1)}
        for row in rows:
            order = int(row["order"])
            t_index = int(grid.time_bin_index(float(row["t"])))
            if t_index < 0:
                raise GridMismatchError(f"Row time {row['t']} is outside the grid horizon {grid.horizon}")
            masses.setdefault(order, np.zeros(grid.shape))
            masses[order][t_index, int(row["boundary_index"]), int(row["angle_index"])] = float(row["mass"])
        return cls(
            grid=grid,
            masses=masses,
            source_duration=artifact.source_duration,
            order=artifact.order,
            tail_bound=artifact.tail_bound,
            incoming_mass=artifact.incoming_mass,
            backend=backend,
            growth_bound=math.inf if artifact.growth_bound is None else artifact.growth_bound,
            source=dict(artifact.source),
        )

    def artifact(self, config_hash: str = "", phantom_hash: str = "") -> ResponseArtifact:
        boundary_nodes, angle_nodes = self.grid.shape[1:]
        return ResponseArtifact(
            config_hash=config_hash,
            grid=GridMetadata(
                boundary_nodes=boundary_nodes,
                angle_nodes=angle_nodes,
                time_bins=self.grid.time_bins,
                horizon=self.grid.horizon,
                tangent_cutoff=self.grid.tangent_cutoff,
            ),
            source_duration=self.source_duration,
            order=self.order,
            backend=self.backend.value,
            tail_bound=self.tail_bound,
            incoming_mass=self.incoming_mass,
            growth_bound=self.growth_bound if math.isfinite(self.growth_bound) else None,
            phantom_hash=phantom_hash,
            source=self.source,
        )


@dataclass(frozen=True)
class MassCheck:
    """Outgoing over incoming L^1 mass against the growth bound e^{T ||sigma_p||}."""

    ratio: float
    bound: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.ratio <= self.bound * (1.0 + self.slack)


def operator_mass_check(response: AlbedoResponse, source: BoundarySource, slack: float = 1e-6) -> MassCheck:
    """Ratio of outgoing to incoming mass; raises when it exceeds the certified growth bound."""
    incoming = source.incoming_mass
    if incoming <= 0.0:
        raise NumericalGuardError("The source carries no incoming mass")
    outgoing = response.mass()
    if not math.isfinite(outgoing) or np.any(response.total() < 0.0):
        raise NumericalGuardError("Response masses must be finite and nonnegative")
    check = MassCheck(ratio=outgoing / incoming, bound=response.growth_bound, slack=slack)
    logger.debug(f"Mass ratio {check.ratio:.8g} against growth bound {check.bound:.6g}")
    if not check.passed:
        raise NumericalGuardError(
            f"Outgoing/incoming mass ratio {check.ratio:.8g} exceeds the growth bound {check.bound:.8g}; "
            "the quadrature is not resolving the response"
        )
    return check
