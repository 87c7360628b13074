"""Discretization of (0, T) x Gamma_+- carrying the measure dt d xi = dt |nu(x).v| d mu(x) dv."""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core.config import QuadratureSettings
from core.types import BoundarySign
from transport_engine.errors import GeometryError
from transport_engine.geometry.domain import Domain
from transport_engine.geometry.quadrature import SphereRule, SurfaceRule

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Boundary nodes x_i, angle nodes v_j and uniform time bins.

    The angle grid covers the whole sphere; pairs (i, j) on the wrong side of
    the tangent plane (or within ``tangent_cutoff`` of it) carry zero weight.
    In d = 2 the nodes are theta_i = 2 pi i / Nb and omega_j = 2 pi j / Na.
    """

    domain: Domain
    sign: BoundarySign
    surface: SurfaceRule
    sphere: SphereRule
    time_edges: NDArray[np.float64]
    tangent_cutoff: float = 1e-6
    cosines: NDArray[np.float64] = field(init=False, repr=False)
    mask: NDArray[np.bool_] = field(init=False, repr=False)

    def __post_init__(self):
        raw = self.surface.normals @ self.sphere.directions.T
        oriented = raw if self.sign is BoundarySign.OUTGOING else -raw
        object.__setattr__(self, "mask", oriented > self.tangent_cutoff)
        object.__setattr__(self, "cosines", np.where(self.mask, oriented, 0.0))

    @classmethod
    def build(
        cls,
        domain: Domain,
        boundary_nodes: int,
        angle_nodes: int,
        time_bins: int,
        horizon: float,
        sign: BoundarySign = BoundarySign.OUTGOING,
        tangent_cutoff: float = 1e-6,
    ) -> "BoundaryGrid":
        if horizon <= 0:
            raise GeometryError(f"Horizon must be positive, got {horizon}")
        if domain.dimension == 2 and angle_nodes % boundary_nodes != 0:
            logger.debug(
                f"angle_nodes={angle_nodes} is not a multiple of boundary_nodes={boundary_nodes}; "
                "tangent directions will fall between angle nodes"
            )
        return cls(
            domain=domain,
            sign=BoundarySign(sign),
            surface=SurfaceRule.build(domain, boundary_nodes),
            sphere=SphereRule.build(domain.dimension, angle_nodes),
            time_edges=np.linspace(0.0, horizon, time_bins + 1),
            tangent_cutoff=tangent_cutoff,
        )

    @classmethod
    def from_settings(
        cls,
        domain: Domain,
        settings: QuadratureSettings,
        horizon: float,
        sign: BoundarySign = BoundarySign.OUTGOING,
    ) -> "BoundaryGrid":
        return cls.build(
            domain,
            settings.boundary_nodes,
            settings.angle_nodes,
            settings.time_bins,
            horizon,
            sign=sign,
            tangent_cutoff=settings.tangent_cutoff,
        )

    def flipped(self) -> "BoundaryGrid":
        """Same nodes on the opposite boundary half."""
        other = BoundarySign.INCOMING if self.sign is BoundarySign.OUTGOING else BoundarySign.OUTGOING
        return BoundaryGrid(self.domain, other, self.surface, self.sphere, self.time_edges, self.tangent_cutoff)

    @property
    def points(self) -> NDArray[np.float64]:
        return self.surface.points

    @property
    def normals(self) -> NDArray[np.float64]:
        return self.surface.normals

    @property
    def directions(self) -> NDArray[np.float64]:
        return self.sphere.directions

    @property
    def boundary_weights(self) -> NDArray[np.float64]:
        return self.surface.weights

    @property
    def angle_weights(self) -> NDArray[np.float64]:
        return self.sphere.weights

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.time_bins, len(self.surface.weights), self.sphere.size

    @property
    def horizon(self) -> float:
        return float(self.time_edges[-1])

    @property
    def time_bins(self) -> int:
        return len(self.time_edges) - 1

    @property
    def time_centers(self) -> NDArray[np.float64]:
        return 0.5 * (self.time_edges[:-1] + self.time_edges[1:])

    @property
    def time_widths(self) -> NDArray[np.float64]:
        return np.diff(self.time_edges)

    @property
    def dt(self) -> float:
        return float(self.time_edges[1] - self.time_edges[0])

    @property
    def xi_weights(self) -> NDArray[np.float64]:
        """d xi of every (boundary, angle) cell, zero off the grid's half of the boundary."""
        return self.cosines * self.surface.weights[:, None] * self.sphere.weights[None, :]

    @property
    def xi_measure(self) -> float:
        return float(np.sum(self.xi_weights))

    def valid_nodes(self) -> tuple[NDArray[np.int_], NDArray[np.int_]]:
        return np.nonzero(self.mask)

    def _require_planar(self) -> None:
        if self.domain.dimension != 2:
            raise GeometryError("Index lookups are available on planar grids only")

    def boundary_index(self, x: ArrayLike) -> NDArray[np.int_]:
        """Index of the boundary cell containing the boundary point x."""
        self._require_planar()
        n = len(self.surface.weights)
        angle = self.domain.boundary_angle(x)
        return np.mod(np.floor(angle / (2.0 * np.pi / n) + 0.5).astype(int), n)

    def angle_index(self, v: ArrayLike) -> NDArray[np.int_]:
        """Index of the angle cell containing direction v."""
        self._require_planar()
        n = self.sphere.size
        v = np.asarray(v, dtype=float)
        angle = np.mod(np.arctan2(v[..., 1], v[..., 0]), 2.0 * np.pi)
        return np.mod(np.floor(angle / (2.0 * np.pi / n) + 0.5).astype(int), n)

    def boundary_cell_edges(self) -> NDArray[np.float64]:
        """Boundary points at the parameter edges theta_i +- pi / Nb, shape (Nb + 1, 2)."""
        self._require_planar()
        n = len(self.surface.weights)
        edges = 2.0 * np.pi * (np.arange(n + 1) - 0.5) / n
        return self.domain.boundary_point(edges)

    def time_bin_index(self, t: ArrayLike) -> NDArray[np.int_]:
        """Bin index of times t; -1 outside (0, T)."""
        t = np.asarray(t, dtype=float)
        index = np.floor(t / self.dt).astype(int)
        return np.where((t >= 0.0) & (t < self.horizon), index, -1)

    def same_discretization(self, other: "BoundaryGrid") -> bool:
        return (
            self.domain == other.domain
            and self.shape == other.shape
            and np.allclose(self.time_edges, other.time_edges)
            and self.tangent_cutoff == other.tangent_cutoff
        )
