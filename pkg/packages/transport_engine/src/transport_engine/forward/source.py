"""Probing sources on (0, eta) x Gamma_-.

A mollified source is separable: g_eps2(t) f_eps1(x', v'). For the closed-form
backend the phase factor is represented by weighted point particles on
Gamma_-; the temporal factor stays continuous and is binned exactly through
its cumulative distribution.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from core.types import BoundarySign
from transport_engine.errors import GeometryError
from transport_engine.geometry import BoundaryGrid, Domain, PhasePoint, gauss_legendre

logger = logging.getLogger(__name__)

_CDF_NODES = 257


def bump(y: ArrayLike) -> NDArray[np.float64]:
    """exp(-1 / (1 - y^2)) on (-1, 1), zero outside."""
    y = np.asarray(y, dtype=float)
    inside = np.abs(y) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - y * y, 1.0)), 0.0)


@lru_cache(maxsize=1)
def _bump_integral() -> float:
    value, _ = integrate.quad(lambda y: float(bump(y)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return value


@lru_cache(maxsize=1)
def _bump_cdf() -> PchipInterpolator:
    edges = np.linspace(-1.0, 1.0, _CDF_NODES)
    pieces = [integrate.quad(lambda y: float(bump(y)), a, b, epsabs=1e-15)[0] for a, b in zip(edges[:-1], edges[1:])]
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    return PchipInterpolator(edges, cumulative / cumulative[-1])


@dataclass(frozen=True)
class TemporalMollifier:
    """g(t) = bump rescaled to (0, width) with unit integral, width = min(eta, eps2)."""

    width: float

    def __post_init__(self):
        if self.width <= 0.0:
            raise GeometryError(f"Temporal mollifier width must be positive, got {self.width}")

    @classmethod
    def build(cls, epsilon: float, duration: float) -> "TemporalMollifier":
        return cls(width=min(epsilon, duration))

    @property
    def centroid(self) -> float:
        return 0.5 * self.width

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        y = 2.0 * np.asarray(t, dtype=float) / self.width - 1.0
        return bump(y) * 2.0 / (self.width * _bump_integral())

    def cdf(self, t: ArrayLike) -> NDArray[np.float64]:
        """int_0^t g, exactly 0 before the support and 1 after it."""
        y = 2.0 * np.asarray(t, dtype=float) / self.width - 1.0
        return np.where(y <= -1.0, 0.0, np.where(y >= 1.0, 1.0, _bump_cdf()(np.clip(y, -1.0, 1.0))))


@dataclass(frozen=True, eq=False)
class SourceParticles:
    """Point sources on Gamma_- with their masses."""

    points: NDArray[np.float64]
    directions: NDArray[np.float64]
    masses: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.masses)

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))


@dataclass(frozen=True, eq=False)
class PhaseMollifier:
    """f_eps1 around (x'0, v'0) in Gamma_-, with unit d xi integral.

    In d = 2 the density is a product of bumps in the boundary angle theta and
    the direction angle omega divided by the d xi Jacobian |nu.v| |dx/dtheta|,
    so its d xi integral equals the (theta, omega) integral of the bumps.
    eps1 = 0 gives a point source.
    """

    domain: Domain
    center: PhasePoint
    epsilon: float
    nodes: int = 6
    theta0: float = field(init=False)
    omega0: float = field(init=False)

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise GeometryError(f"Phase mollifier width must be nonnegative, got {self.epsilon}")
        if abs(float(self.domain.level(self.center.x)) - 1.0) > 1e-9:
            raise GeometryError(f"Source center {self.center.x} is not on the boundary")
        if float(self.domain.outward_normal(self.center.x) @ self.center.v) >= 0.0:
            raise GeometryError(f"Source direction {self.center.v} does not point into the domain")
        if self.domain.dimension != 2 and self.epsilon > 0.0:
            raise GeometryError("Mollified sources are planar; use a point source in d = 3")
        theta0 = float(self.domain.boundary_angle(self.center.x)) if self.domain.dimension == 2 else 0.0
        omega0 = float(np.arctan2(self.center.v[1], self.center.v[0]))
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "omega0", omega0)

    @property
    def is_point(self) -> bool:
        return self.epsilon == 0.0

    def density(self, x: ArrayLike, v: ArrayLike) -> NDArray[np.float64]:
        """Pointwise density with respect to d xi at boundary points x and directions v."""
        if self.is_point:
            raise GeometryError("A point source has no pointwise density")
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        theta = self.domain.boundary_angle(x)
        omega = np.arctan2(v[..., 1], v[..., 0])
        dtheta = np.angle(np.exp(1j * (theta - self.theta0)))
        domega = np.angle(np.exp(1j * (omega - self.omega0)))
        cosine = -np.sum(self.domain.outward_normal(x) * v, axis=-1)
        jacobian = np.abs(cosine) * self.domain.boundary_speed(theta)
        mass = bump(dtheta / self.epsilon) * bump(domega / self.epsilon) / (self.epsilon * _bump_integral()) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((cosine > 0.0) & (mass > 0.0), mass / jacobian, 0.0)

    def particles(self) -> SourceParticles:
        if self.is_point:
            return SourceParticles(self.center.x[None, :], self.center.v[None, :], np.ones(1))
        u, w = gauss_legendre(self.nodes)
        y = 2.0 * u - 1.0
        profile = w * bump(y)
        theta = self.theta0 + self.epsilon * y
        omega = self.omega0 + self.epsilon * y
        points = np.repeat(self.domain.boundary_point(theta), self.nodes, axis=0)
        directions = np.tile(np.stack([np.cos(omega), np.sin(omega)], axis=-1), (self.nodes, 1))
        masses = np.outer(profile, profile).ravel()
        incoming = np.sum(self.domain.outward_normal(points) * directions, axis=-1) < 0.0
        if not np.all(incoming):
            logger.warning(f"Dropping {int(np.sum(~incoming))} source particles that do not enter the domain")
        masses = np.where(incoming, masses, 0.0)
        return SourceParticles(points[incoming], directions[incoming], masses[incoming] / np.sum(masses))


@dataclass(frozen=True, eq=False)
class BoundarySource:
    """phi(t, x', v') = g(t) f(x', v') on (0, eta) x Gamma_-.

    The phase factor is either a mollifier or a table on an incoming grid
    (per-node densities with respect to d xi).
    """

    temporal: TemporalMollifier
    duration: float
    phase: Optional[PhaseMollifier] = None
    table: Optional[NDArray[np.float64]] = None
    grid: Optional[BoundaryGrid] = None

    def __post_init__(self):
        if (self.phase is None) == (self.table is None):
            raise GeometryError("A source needs exactly one of a phase mollifier or a table")
        if self.temporal.width > self.duration + 1e-15:
            raise GeometryError(f"Temporal support {self.temporal.width} exceeds eta = {self.duration}")
        if self.table is not None:
            if self.grid is None or self.grid.sign is not BoundarySign.INCOMING:
                raise GeometryError("Tabulated sources live on an incoming boundary grid")
            if self.table.shape != self.grid.shape[1:]:
                raise GeometryError(f"Table shape {self.table.shape} does not match grid {self.grid.shape[1:]}")
            if np.any(self.table < 0.0):
                raise GeometryError("Source tables must be nonnegative")

    @classmethod
    def mollified(
        cls, domain: Domain, center: PhasePoint, epsilon1: float, epsilon2: float, duration: float, nodes: int = 6
    ) -> "BoundarySource":
        return cls(
            temporal=TemporalMollifier.build(epsilon2, duration),
            duration=duration,
            phase=PhaseMollifier(domain, center, epsilon1, nodes),
        )

    @classmethod
    def tabulated(cls, grid: BoundaryGrid, table: ArrayLike, epsilon2: float, duration: float) -> "BoundarySource":
        return cls(
            temporal=TemporalMollifier.build(epsilon2, duration),
            duration=duration,
            table=np.asarray(table, dtype=float),
            grid=grid,
        )

    @property
    def center(self) -> Optional[PhasePoint]:
        return self.phase.center if self.phase is not None else None

    @property
    def epsilon(self) -> float:
        return self.phase.epsilon if self.phase is not None else math.nan

    def particles(self) -> SourceParticles:
        if self.phase is not None:
            return self.phase.particles()
        rows, cols = self.grid.valid_nodes()
        masses = self.table[rows, cols] * self.grid.xi_weights[rows, cols]
        keep = masses > 0.0
        return SourceParticles(self.grid.points[rows[keep]], self.grid.directions[cols[keep]], masses[keep])

    @property
    def incoming_mass(self) -> float:
        """int phi dt d xi under the particle quadrature."""
        return self.particles().total

    def centroid(self) -> PhasePoint:
        """Mass centroid: the mollifier center, or the heaviest table node."""
        if self.phase is not None:
            return self.phase.center
        particles = self.particles()
        heaviest = int(np.argmax(particles.masses))
        return PhasePoint(particles.points[heaviest], particles.directions[heaviest])

    def phase_density(self, x: ArrayLike, v: ArrayLike) -> NDArray[np.float64]:
        if self.phase is not None:
            return self.phase.density(x, v)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        incoming = np.sum(self.grid.domain.outward_normal(x) * v, axis=-1) < 0.0
        values = self.table[self.grid.boundary_index(x), self.grid.angle_index(v)]
        return np.where(incoming, values, 0.0)

    def __call__(self, t: ArrayLike, x: ArrayLike, v: ArrayLike) -> NDArray[np.float64]:
        return self.temporal(t) * self.phase_density(x, v)

    def describe(self) -> dict:
        center = self.center
        return {
            "kind": "mollified" if self.phase is not None else "tabulated",
            "epsilon1": self.epsilon if self.phase is not None else None,
            "epsilon2": self.temporal.width,
            "center_point": center.x.tolist() if center is not None else None,
            "center_direction": center.v.tolist() if center is not None else None,
        }
