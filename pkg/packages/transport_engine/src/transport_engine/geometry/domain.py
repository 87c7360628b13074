"""Convex domains with closed-form ray intersection.

All shapes are axis-aligned ellipsoids centered at the origin (disk, ball and
ellipse), so every query reduces to a quadratic in scaled coordinates
y = x / axes.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from core.config import DomainSettings
from core.types import DomainKind, RaySign
from transport_engine.errors import GeometryError

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-12
CONTAINMENT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Domain:
    """Convex region X with a C^1 (in fact smooth) boundary."""

    kind: DomainKind
    semi_axes: tuple[float, ...]

    def __post_init__(self):
        expected = 3 if self.kind is DomainKind.UNIT_BALL else 2
        if len(self.semi_axes) != expected:
            raise GeometryError(f"{self.kind.value} needs {expected} semi-axes, got {self.semi_axes}")
        if min(self.semi_axes) <= 0:
            raise GeometryError(f"Semi-axes must be positive, got {self.semi_axes}")

    @classmethod
    def unit_disk(cls) -> "Domain":
        return cls(DomainKind.UNIT_DISK, (1.0, 1.0))

    @classmethod
    def unit_ball(cls) -> "Domain":
        return cls(DomainKind.UNIT_BALL, (1.0, 1.0, 1.0))

    @classmethod
    def ellipse(cls, a: float, b: float) -> "Domain":
        return cls(DomainKind.ELLIPSE, (float(a), float(b)))

    @classmethod
    def from_settings(cls, settings: DomainSettings) -> "Domain":
        if settings.kind is DomainKind.UNIT_DISK:
            return cls.unit_disk()
        if settings.kind is DomainKind.UNIT_BALL:
            return cls.unit_ball()
        a, b = settings.semi_axes
        logger.info(f"Using ellipse domain with semi-axes ({a:g}, {b:g})")
        return cls.ellipse(a, b)

    @property
    def dimension(self) -> int:
        return len(self.semi_axes)

    @property
    def axes(self) -> NDArray[np.float64]:
        return np.asarray(self.semi_axes, dtype=float)

    @property
    def diameter(self) -> float:
        return 2.0 * max(self.semi_axes)

    @property
    def volume(self) -> float:
        if self.dimension == 2:
            return math.pi * self.semi_axes[0] * self.semi_axes[1]
        return 4.0 / 3.0 * math.pi * float(np.prod(self.semi_axes))

    @property
    def boundary_measure(self) -> float:
        """Perimeter (d = 2) or surface area (d = 3) of the boundary."""
        if self.dimension == 2:
            a, b = max(self.semi_axes), min(self.semi_axes)
            return 4.0 * a * float(special.ellipe(1.0 - (b / a) ** 2))
        radius = self.semi_axes[0]
        if not all(math.isclose(axis, radius) for axis in self.semi_axes):
            raise GeometryError("Surface area is only available for spheres in d = 3")
        return 4.0 * math.pi * radius**2

    def level(self, x: ArrayLike) -> NDArray[np.float64]:
        """|x / axes|^2, equal to 1 on the boundary."""
        y = np.asarray(x, dtype=float) / self.axes
        return np.sum(y * y, axis=-1)

    def contains(self, x: ArrayLike, tol: float = CONTAINMENT_TOLERANCE) -> NDArray[np.bool_]:
        """Membership in the closure of X."""
        return self.level(x) <= 1.0 + tol

    def outward_normal(self, x: ArrayLike) -> NDArray[np.float64]:
        gradient = np.asarray(x, dtype=float) / self.axes**2
        return gradient / np.linalg.norm(gradient, axis=-1, keepdims=True)

    def boundary_point(self, theta: ArrayLike, phi: Optional[ArrayLike] = None) -> NDArray[np.float64]:
        """Boundary parametrization: angle theta in d = 2, (polar, azimuth) in d = 3."""
        theta = np.asarray(theta, dtype=float)
        if self.dimension == 2:
            a, b = self.semi_axes
            return np.stack([a * np.cos(theta), b * np.sin(theta)], axis=-1)
        if phi is None:
            raise GeometryError("Boundary points in d = 3 need a polar and an azimuthal angle")
        phi = np.asarray(phi, dtype=float)
        unit = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
        return unit * self.axes

    def boundary_speed(self, theta: ArrayLike) -> NDArray[np.float64]:
        """|d x / d theta| of the d = 2 parametrization."""
        if self.dimension != 2:
            raise GeometryError("boundary_speed is defined for planar domains only")
        a, b = self.semi_axes
        theta = np.asarray(theta, dtype=float)
        return np.hypot(a * np.sin(theta), b * np.cos(theta))

    def boundary_angle(self, x: ArrayLike) -> NDArray[np.float64]:
        """Inverse of the d = 2 parametrization, in [0, 2 pi)."""
        y = np.asarray(x, dtype=float) / self.axes
        return np.mod(np.arctan2(y[..., 1], y[..., 0]), 2.0 * np.pi)

    def _quadratic(self, x: NDArray, w: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        y = x / self.axes
        z = w / self.axes
        a = np.sum(z * z, axis=-1)
        b = np.sum(y * z, axis=-1)
        c = np.sum(y * y, axis=-1) - 1.0
        return a, b, c

    def exit_distance(self, x: ArrayLike, w: ArrayLike) -> NDArray[np.float64]:
        """Largest s >= 0 with x + s w in the closure of X, without input validation.

        Uses the numerically stable root of a s^2 + 2 b s + c = 0 so that
        points on the boundary moving outwards get exactly 0.
        """
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        a, b, c = self._quadratic(x, w)
        root = np.sqrt(np.maximum(b * b - a * c, 0.0))
        q = -(b + np.copysign(root, b))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(q != 0.0, q / a, 0.0)
            r2 = np.where(q != 0.0, c / q, 0.0)
        return np.maximum(np.maximum(r1, r2), 0.0)

    def exit_time(self, x: ArrayLike, v: ArrayLike, sign: RaySign = RaySign.PLUS) -> NDArray[np.float64]:
        """tau_+(x, v) (sign +) or tau_-(x, v) (sign -) for x in the closure of X and unit v."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        norms = np.linalg.norm(v, axis=-1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
            raise GeometryError(f"Directions must be unit vectors, max deviation {np.max(np.abs(norms - 1.0)):.3e}")
        if not np.all(self.contains(x)):
            raise GeometryError("exit_time needs points inside the closure of the domain")
        w = v if RaySign(sign) is RaySign.PLUS else -v
        return self.exit_distance(x, w)

    def chord_time(self, x: ArrayLike, v: ArrayLike) -> NDArray[np.float64]:
        """tau(x, v) = tau_+ + tau_-."""
        return self.exit_time(x, v, RaySign.PLUS) + self.exit_time(x, v, RaySign.MINUS)

    def line_intersection(self, point: ArrayLike, direction: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
        """Parameters (s0, s1) where the full line point + s direction meets the boundary.

        Returns a hit mask as third element; s0 = s1 = 0 where the line misses X.
        """
        point = np.asarray(point, dtype=float)
        direction = np.asarray(direction, dtype=float)
        a, b, c = self._quadratic(point, direction)
        discriminant = b * b - a * c
        hit = discriminant > 0.0
        root = np.sqrt(np.maximum(discriminant, 0.0))
        s0 = np.where(hit, (-b - root) / a, 0.0)
        s1 = np.where(hit, (-b + root) / a, 0.0)
        return s0, s1, hit


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A point x of the closure of X together with a unit direction v."""

    x: NDArray[np.float64]
    v: NDArray[np.float64]

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape:
            raise GeometryError(f"Position shape {x.shape} does not match direction shape {v.shape}")
        if abs(float(np.linalg.norm(v)) - 1.0) > UNIT_TOLERANCE:
            raise GeometryError(f"Direction {v} is not a unit vector")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @classmethod
    def planar(cls, x: ArrayLike, angle: float) -> "PhasePoint":
        return cls(np.asarray(x, dtype=float), np.array([math.cos(angle), math.sin(angle)]))


def exit_time(domain: Domain, point: PhasePoint, sign: RaySign = RaySign.PLUS) -> float:
    """tau_+ or tau_- of a single phase point."""
    return float(domain.exit_time(point.x, point.v, sign))


def segment_indicator(domain: Domain, x: ArrayLike, y: ArrayLike) -> NDArray[np.int_]:
    """1 where the closed segment [x, y] lies in the closure of X; convexity reduces this to the endpoints."""
    return (domain.contains(x) & domain.contains(y)).astype(int)
