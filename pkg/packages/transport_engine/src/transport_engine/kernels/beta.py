"""The beta function bounding the L^p norm of the two-collision kernel.

    beta(x') = int_{Gamma_+} int_{|x - x'|}^{T + diam X} (s - (x - x').v)^{p(d-3)} / |x - x' - s v|^{p(2d-4)} ds dxi

The s-integral is done in closed form. What is left is an integral over the
outgoing boundary whose angular part is singular in the direction
e = (x - x') / |x - x'|:

- d = 2: the inner integral is
  [r^{1-p} (1 - cos a)^{1-p} - (L - r cos a)^{1-p}] / (p - 1) with a the angle
  between v and e. The first term behaves like a^{2-2p} and is integrated
  with Gauss-Jacobi on both sides of e, the second with Gauss-Legendre.
- d = 3: the substitution s - r cos a = r sin a tan(theta) turns the inner
  integral into (r sin a)^{1-2p} times an incomplete integral of
  cos^{2p-2}, which is a regularized incomplete beta function.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special
from scipy.stats import qmc

from core.config import DEFAULT_EXPONENTS
from core.utils import chunked, ordered_map
from transport_engine.errors import KernelDomainError
from transport_engine.geometry import Domain, SurfaceRule, gauss_legendre

logger = logging.getLogger(__name__)

_CHUNK = 64


def default_p(dimension: int) -> float:
    """Integrability exponent used when none is configured."""
    if dimension not in DEFAULT_EXPONENTS:
        raise KernelDomainError(
            f"No default exponent for d = {dimension}, valid dimensions are: {list(DEFAULT_EXPONENTS)}"
        )
    return DEFAULT_EXPONENTS[dimension]


def require_exponent(p: float, dimension: int) -> None:
    """Raise unless 1 < p < (d + 1) / d."""
    upper = (dimension + 1) / dimension
    if not 1.0 < p < upper:
        raise KernelDomainError(f"p must lie in (1, {upper:.6g}) for d = {dimension}, got {p}")


@lru_cache(maxsize=32)
def _jacobi(n: int, exponent: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Nodes and weights for int_{-1}^{1} (1 + t)^exponent f(t) dt."""
    return special.roots_jacobi(n, 0.0, exponent)


def _planar_angles(r: NDArray, delta: NDArray, p: float, reach: float, n: int) -> NDArray[np.float64]:
    """Angular integral of the closed-form s-integral at each boundary node (d = 2, p > 1).

    ``delta`` is the angle from the outward normal to e, in (-pi/2, pi/2).
    """
    t, jacobi_weights = _jacobi(n, 2.0 - 2.0 * p)
    u, legendre_weights = gauss_legendre(n)
    total = np.zeros_like(r)
    for sign, width in ((1.0, 0.5 * np.pi - delta), (-1.0, 0.5 * np.pi + delta)):
        alpha = width[:, None] * 0.5 * (1.0 + t)[None, :]
        # (1 - cos a) / a^2 without cancellation
        smooth = (2.0 * np.sin(0.5 * alpha) ** 2 / alpha**2) ** (1.0 - p)
        facing = np.cos(delta[:, None] + sign * alpha)
        near = (0.5 * width) ** (3.0 - 2.0 * p) * np.sum(jacobi_weights * smooth * facing, axis=-1)

        alpha = width[:, None] * u[None, :]
        facing = np.cos(delta[:, None] + sign * alpha)
        far = width * np.sum(legendre_weights * (reach - r[:, None] * np.cos(alpha)) ** (1.0 - p) * facing, axis=-1)
        total += (r ** (1.0 - p) * near - far) / (p - 1.0)
    return total


def _planar_mass_angles(r: NDArray, delta: NDArray, reach: float, n: int) -> NDArray[np.float64]:
    """p = 1 counterpart of ``_planar_angles``: the s-integral is a logarithm."""
    u, weights = gauss_legendre(n)
    total = np.zeros_like(r)
    for sign, width in ((1.0, 0.5 * np.pi - delta), (-1.0, 0.5 * np.pi + delta)):
        # a = width u^2 removes the log singularity at a = 0
        alpha = width[:, None] * u[None, :] ** 2
        jacobian = 2.0 * width[:, None] * u[None, :]
        inner = np.log(reach - r[:, None] * np.cos(alpha)) - np.log(r[:, None] * 2.0 * np.sin(0.5 * alpha) ** 2)
        facing = np.cos(delta[:, None] + sign * alpha)
        total += np.sum(weights * inner * facing * jacobian, axis=-1)
    return total


def _beta_planar(
    domain: Domain,
    x_prime: NDArray,
    p: float,
    horizon: float,
    boundary_nodes: int,
    angle_nodes: int,
    rotation: float,
    threads: Optional[int],
) -> float:
    theta = rotation + 2.0 * np.pi * np.arange(boundary_nodes) / boundary_nodes
    points = domain.boundary_point(theta)
    measure = domain.boundary_speed(theta) * 2.0 * np.pi / boundary_nodes
    normals = domain.outward_normal(points)
    offset = points - x_prime
    r = np.linalg.norm(offset, axis=-1)
    delta = np.arctan2(offset[:, 1], offset[:, 0]) - np.arctan2(normals[:, 1], normals[:, 0])
    delta = np.clip(np.angle(np.exp(1j * delta)), -0.5 * np.pi, 0.5 * np.pi)
    reach = horizon + domain.diameter

    def chunk(part: slice) -> float:
        if p == 1.0:
            values = _planar_mass_angles(r[part], delta[part], reach, angle_nodes)
        else:
            values = _planar_angles(r[part], delta[part], p, reach, angle_nodes)
        return float(np.sum(measure[part] * values))

    return math.fsum(ordered_map(chunk, chunked(boundary_nodes, _CHUNK), threads))


def _cos_power_integral(theta: NDArray, m: float) -> NDArray[np.float64]:
    """int_0^theta cos^m for theta in [0, pi/2]."""
    a, b = 0.5, 0.5 * (m + 1.0)
    return 0.5 * special.beta(a, b) * special.betainc(a, b, np.sin(theta) ** 2)


def _orthonormal_frame(e: NDArray) -> tuple[NDArray, NDArray]:
    helper = np.where(np.abs(e[:, :1]) < 0.9, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    first = helper - np.sum(helper * e, axis=-1, keepdims=True) * e
    first /= np.linalg.norm(first, axis=-1, keepdims=True)
    return first, np.cross(e, first)


def _beta_spatial(
    domain: Domain,
    x_prime: NDArray,
    p: float,
    horizon: float,
    boundary_nodes: int,
    angle_nodes: int,
    threads: Optional[int],
) -> float:
    # boundary_nodes is a total budget; the sphere rule has n/2 x n nodes
    surface = SurfaceRule.build(domain, max(8, int(round(math.sqrt(2 * boundary_nodes)))))
    reach = horizon + domain.diameter
    t, polar_weights = _jacobi(angle_nodes, 2.0 - 2.0 * p)
    alpha = 0.5 * np.pi * (1.0 + t)
    polar_weights = (0.5 * np.pi) ** (3.0 - 2.0 * p) * polar_weights
    phi = 2.0 * np.pi * np.arange(angle_nodes) / angle_nodes
    ring = np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def chunk(part: slice) -> float:
        offset = surface.points[part] - x_prime
        r = np.linalg.norm(offset, axis=-1)
        e = offset / r[:, None]
        first, second = _orthonormal_frame(e)
        around = ring[None, :, 0, None] * first[:, None, :] + ring[None, :, 1, None] * second[:, None, :]
        v = (
            np.cos(alpha)[None, :, None, None] * e[:, None, None, :]
            + np.sin(alpha)[None, :, None, None] * around[:, None, :, :]
        )
        facing = np.maximum(np.einsum("bapk,bk->bap", v, surface.normals[part]), 0.0)
        azimuthal = np.sum(facing, axis=-1) * (2.0 * np.pi / angle_nodes)

        height = r[:, None] * np.sin(alpha)[None, :]
        upper = np.arctan2(reach - r[:, None] * np.cos(alpha)[None, :], height)
        m = 2.0 * p - 2.0
        cos_integral = _cos_power_integral(upper, m) - _cos_power_integral(0.5 * alpha, m)[None, :]
        smooth = (np.sin(alpha) / alpha)[None, :] ** (2.0 - 2.0 * p) * cos_integral
        values = r ** (1.0 - 2.0 * p) * np.sum(polar_weights * smooth * azimuthal, axis=-1)
        return float(np.sum(surface.weights[part] * values))

    return math.fsum(ordered_map(chunk, chunked(len(surface.weights), _CHUNK), threads))


def _beta(
    domain: Domain,
    x_prime: ArrayLike,
    p: float,
    horizon: float,
    boundary_nodes: int,
    angle_nodes: int,
    rotation: float,
    threads: Optional[int],
) -> float:
    x_prime = np.asarray(x_prime, dtype=float)
    if horizon <= 0.0:
        raise KernelDomainError(f"The horizon must be positive, got {horizon}")
    if float(domain.level(x_prime)) >= 1.0:
        raise KernelDomainError(f"beta is evaluated at interior points, got {x_prime.tolist()}")
    if domain.dimension == 2:
        return _beta_planar(domain, x_prime, p, horizon, boundary_nodes, angle_nodes, rotation, threads)
    if domain.dimension == 3:
        return _beta_spatial(domain, x_prime, p, horizon, boundary_nodes, angle_nodes, threads)
    raise KernelDomainError(f"beta is implemented for d = 2, 3, got d = {domain.dimension}")


def beta_function(
    domain: Domain,
    x_prime: ArrayLike,
    p: float,
    horizon: float,
    boundary_nodes: int = 512,
    angle_nodes: int = 32,
    rotation: float = 0.0,
    threads: Optional[int] = None,
) -> float:
    """beta(x') for 1 < p < (d + 1) / d.

    ``rotation`` shifts the planar boundary nodes, which leaves the value
    unchanged up to quadrature error.
    """
    require_exponent(p, domain.dimension)
    return _beta(domain, x_prime, p, horizon, boundary_nodes, angle_nodes, rotation, threads)


def beta_mass_function(
    domain: Domain,
    x_prime: ArrayLike,
    horizon: float,
    boundary_nodes: int = 512,
    angle_nodes: int = 32,
    threads: Optional[int] = None,
) -> float:
    """beta(x') at p = 1, which bounds the L^1 mass of the two-collision kernel."""
    return _beta(domain, x_prime, 1.0, horizon, boundary_nodes, angle_nodes, 0.0, threads)


def beta_upper_bound(domain: Domain, p: float, samples: int = 64) -> float:
    """Analytic planar bound.

    beta <= 1/(p-1) int_0^{2 pi} (1 - cos w)^{1-p} dw sup_z int_{dX} |x - z|^{1-p} d mu(x).
    The z-integral is subharmonic, so its sup over the closure is taken on the
    boundary; circles have it in closed form.
    """
    if domain.dimension != 2:
        raise KernelDomainError("The analytic beta bound is implemented for planar domains only")
    require_exponent(p, 2)
    angular = 2.0 ** (2.0 - p) * math.sqrt(math.pi) * math.gamma(1.5 - p) / math.gamma(2.0 - p)
    a, b = domain.semi_axes
    if a == b:
        boundary = a ** (2.0 - p) * 2.0 ** (2.0 - p) * math.sqrt(math.pi) * math.gamma(1.0 - 0.5 * p)
        boundary /= math.gamma(1.5 - 0.5 * p)
    else:
        boundary = 0.0
        for theta_z in 2.0 * np.pi * np.arange(samples) / samples:
            z = domain.boundary_point(theta_z)

            def integrand(theta: float) -> float:
                distance = float(np.linalg.norm(domain.boundary_point(theta) - z))
                return max(distance, 1e-300) ** (1.0 - p) * float(domain.boundary_speed(theta))

            value, _ = integrate.quad(integrand, theta_z, theta_z + 2.0 * np.pi, limit=200)
            boundary = max(boundary, value)
    return angular * boundary / (p - 1.0)


@dataclass(frozen=True, eq=False)
class BetaEstimate:
    """Sampled sup of beta over a Halton set of interior points."""

    points: NDArray[np.float64]
    values: NDArray[np.float64]
    p: float
    horizon: float
    safety: float

    @property
    def sup(self) -> float:
        return float(np.max(self.values))

    @property
    def safe(self) -> float:
        return self.safety * self.sup


def interior_halton_points(domain: Domain, count: int, radius: float, seed: int = 0) -> NDArray[np.float64]:
    """Scrambled Halton points uniformly spread over radius * X, origin first."""
    sampler = qmc.Halton(d=domain.dimension, scramble=True, seed=seed)
    u = sampler.random(max(count - 1, 0))
    if domain.dimension == 2:
        rho = radius * np.sqrt(u[:, 0])
        angle = 2.0 * np.pi * u[:, 1]
        unit = rho[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    else:
        rho = radius * np.cbrt(u[:, 0])
        cosine = 1.0 - 2.0 * u[:, 1]
        sine = np.sqrt(1.0 - cosine**2)
        azimuth = 2.0 * np.pi * u[:, 2]
        unit = rho[:, None] * np.stack([sine * np.cos(azimuth), sine * np.sin(azimuth), cosine], axis=-1)
    return np.concatenate([np.zeros((1, domain.dimension)), unit * domain.axes])


def beta_sup_estimate(
    domain: Domain,
    p: float,
    horizon: float,
    samples: int = 64,
    radius: float = 0.9,
    safety: float = 1.1,
    boundary_nodes: int = 512,
    angle_nodes: int = 32,
    seed: int = 0,
    threads: Optional[int] = None,
) -> BetaEstimate:
    """max of beta over Halton points times a safety factor."""
    require_exponent(p, domain.dimension)
    points = interior_halton_points(domain, samples, radius, seed)
    values = ordered_map(
        lambda x: _beta(domain, x, p, horizon, boundary_nodes, angle_nodes, 0.0, None),
        points,
        threads,
    )
    estimate = BetaEstimate(points=points, values=np.asarray(values), p=p, horizon=horizon, safety=safety)
    logger.info(f"beta sup over {len(points)} points: {estimate.sup:.6g} (p = {p:g}, T = {horizon:g})")
    return estimate
