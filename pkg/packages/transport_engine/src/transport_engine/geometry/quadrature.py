"""Quadrature rules on segments, spheres and the domain itself."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy import special

from transport_engine.errors import GeometryError
from transport_engine.geometry.domain import Domain


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = special.roots_legendre(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


@dataclass(frozen=True)
class LineQuadrature:
    """Composite Gauss-Legendre rule on [0, 1] used for every ray integral.

    A ray segment [s0, s1] is mapped affinely onto [0, 1], so one rule serves
    rays of any length; ``panels`` is sized for the longest chord.
    """

    nodes_per_panel: int = 16
    panels: int = 16

    @classmethod
    def for_length(cls, length: float, nodes_per_panel: int = 16, panel_length: float = 0.125) -> "LineQuadrature":
        return cls(nodes_per_panel=nodes_per_panel, panels=max(1, math.ceil(length / panel_length)))

    @property
    def rule(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        return _composite_rule(self.nodes_per_panel, self.panels)


@lru_cache(maxsize=64)
def _composite_rule(nodes_per_panel: int, panels: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    base_nodes, base_weights = gauss_legendre(nodes_per_panel)
    starts = np.arange(panels) / panels
    nodes = (starts[:, None] + base_nodes[None, :] / panels).ravel()
    weights = np.tile(base_weights / panels, panels)
    return nodes, weights


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Quadrature on S^{d-1}.

    d = 2 uses the periodic trapezoid rule (spectral for smooth integrands),
    d = 3 uses Gauss-Legendre in the polar cosine times a uniform azimuth.
    """

    directions: NDArray[np.float64]
    weights: NDArray[np.float64]
    dimension: int

    @classmethod
    def build(cls, dimension: int, n: int, offset: float = 0.0) -> "SphereRule":
        if dimension == 2:
            angles = offset + 2.0 * np.pi * np.arange(n) / n
            directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
            return cls(directions, np.full(n, 2.0 * np.pi / n), 2)
        if dimension == 3:
            polar = max(2, n // 2)
            cosines, polar_weights = special.roots_legendre(polar)
            azimuth = offset + 2.0 * np.pi * np.arange(n) / n
            sines = np.sqrt(1.0 - cosines**2)
            directions = np.stack(
                [
                    sines[:, None] * np.cos(azimuth)[None, :],
                    sines[:, None] * np.sin(azimuth)[None, :],
                    np.broadcast_to(cosines[:, None], (polar, n)),
                ],
                axis=-1,
            ).reshape(-1, 3)
            weights = (polar_weights[:, None] * np.full(n, 2.0 * np.pi / n)[None, :]).ravel()
            return cls(directions, weights, 3)
        raise GeometryError(f"Sphere rules exist for d = 2 and d = 3, got d = {dimension}")

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True, eq=False)
class VolumeRule:
    """Tensor rule on X: Gauss-Legendre in the radius times a sphere rule."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    @classmethod
    def build(cls, domain: Domain, radial_nodes: int = 32, angle_nodes: int = 64) -> "VolumeRule":
        radii, radial_weights = gauss_legendre(radial_nodes)
        sphere = SphereRule.build(domain.dimension, angle_nodes)
        jacobian = radii ** (domain.dimension - 1) * float(np.prod(domain.axes))
        points = radii[:, None, None] * sphere.directions[None, :, :] * domain.axes
        weights = (radial_weights * jacobian)[:, None] * sphere.weights[None, :]
        return cls(points.reshape(-1, domain.dimension), weights.ravel())


@dataclass(frozen=True, eq=False)
class SurfaceRule:
    """Boundary nodes with their surface measure d mu and outward normals."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]
    normals: NDArray[np.float64]
    angles: NDArray[np.float64]

    @classmethod
    def build(cls, domain: Domain, n: int) -> "SurfaceRule":
        if domain.dimension == 2:
            theta = 2.0 * np.pi * np.arange(n) / n
            points = domain.boundary_point(theta)
            weights = domain.boundary_speed(theta) * 2.0 * np.pi / n
            return cls(points, weights, domain.outward_normal(points), theta)
        sphere = SphereRule.build(3, n)
        radius = domain.semi_axes[0]
        points = radius * sphere.directions
        polar = np.arccos(np.clip(sphere.directions[:, 2], -1.0, 1.0))
        return cls(points, sphere.weights * radius**2, domain.outward_normal(points), polar)
