"""The explicit two-collision kernel.

A particle leaves its first collision point x' in direction v1, scatters a
second time at z = x - s1 v into v and exits at x after a total time tau. The
two-collision geometry fixes s1 and v1 from (tau, x, v, x'):

    s1 = (tau^2 - |x - x'|^2) / (2 (tau - (x - x').v)),  v1 = (x - x' - s1 v) / (tau - s1)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_engine.coefficients import CoefficientPair, line_integral_sigma
from transport_engine.errors import KernelDomainError
from transport_engine.geometry import Domain, LineQuadrature, PhasePoint


@dataclass(frozen=True, eq=False)
class DoubleScatterEvaluation:
    """Kernel values with the reconstructed collision geometry.

    ``singular`` marks evaluations on (or within the exclusion tube of) the
    singular set; their value is NaN.
    """

    value: NDArray[np.float64]
    s1: NDArray[np.float64]
    v1: NDArray[np.float64]
    singular: NDArray[np.bool_]

    def finite_values(self) -> NDArray[np.float64]:
        """Values with the flagged entries set to zero (their mass is carried by the L^p bound)."""
        return np.where(self.singular, 0.0, np.nan_to_num(self.value, nan=0.0))


def double_scatter_values(
    pair: CoefficientPair,
    domain: Domain,
    tau: ArrayLike,
    x: ArrayLike,
    v: ArrayLike,
    x_prime: ArrayLike,
    v_prime: ArrayLike,
    tube: float = 1e-4,
    line: Optional[LineQuadrature] = None,
) -> DoubleScatterEvaluation:
    """Vectorized two-collision kernel; arguments broadcast over leading axes."""
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    v_prime = np.asarray(v_prime, dtype=float)
    d = domain.dimension

    offset = x - x_prime
    distance = np.linalg.norm(offset, axis=-1)
    along = np.sum(offset * v, axis=-1)
    requested = np.broadcast_shapes(tau.shape, along.shape, v_prime.shape[:-1])
    # scalar queries run as one-element batches
    shape = requested or (1,)
    tau, distance, along = (np.broadcast_to(a, shape) for a in (tau, distance, along))

    gap = tau - along
    inside = tau > distance
    on_edge = np.abs(tau - distance) <= 1e-14 * np.maximum(distance, 1.0)
    singular = on_edge | (inside & (gap < tube))
    active = inside & ~singular

    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(active, (tau**2 - distance**2) / (2.0 * gap), 0.0)
        remaining = tau - s1
        v1 = (offset - s1[..., None] * v) / np.where(active, remaining, 1.0)[..., None]
    v1 = np.broadcast_to(v1, shape + (d,))
    z = x - s1[..., None] * v
    # the second collision has to happen inside X
    active &= domain.contains(z) & (s1 >= 0.0) & (remaining > 0.0)

    value = np.zeros(shape)
    if np.any(active):
        idx = np.nonzero(active)
        zs = np.broadcast_to(z, shape + (d,))[idx]
        v1s = v1[idx]
        xs = np.broadcast_to(x, shape + (d,))[idx]
        vs = np.broadcast_to(v, shape + (d,))[idx]
        xps = np.broadcast_to(x_prime, shape + (d,))[idx]
        vps = np.broadcast_to(v_prime, shape + (d,))[idx]
        s1s = s1[idx]
        legs = line_integral_sigma(pair, domain, xs, vs, -s1s, np.zeros_like(s1s), line=line, check=False)
        legs = legs + line_integral_sigma(
            pair, domain, xps, v1s, np.zeros_like(s1s), remaining[idx], line=line, check=False
        )
        kernels = pair.kappa_at(zs, v1s, vs) * pair.kappa_at(xps, vps, v1s)
        miss = xs - xps - tau[idx][:, None] * vs
        jacobian = 2.0 ** (d - 2) * gap[idx] ** (d - 3) / np.linalg.norm(miss, axis=-1) ** (2 * d - 4)
        value[idx] = np.exp(-legs) * kernels * jacobian
    value = np.where(singular, np.nan, value)
    return DoubleScatterEvaluation(
        value=value.reshape(requested),
        s1=s1.reshape(requested),
        v1=v1.reshape(requested + (d,)),
        singular=singular.reshape(requested),
    )


def double_scatter_kernel(
    pair: CoefficientPair,
    domain: Domain,
    tau: float,
    exit: PhasePoint,
    x_prime: ArrayLike,
    v_prime: ArrayLike,
    tube: float = 1e-4,
    line: Optional[LineQuadrature] = None,
) -> DoubleScatterEvaluation:
    """Two-collision kernel at one exit for one first-collision point x' reached in direction v'."""
    if domain.dimension not in (2, 3):
        raise KernelDomainError(f"The two-collision kernel is implemented for d = 2, 3, got d = {domain.dimension}")
    if not np.all(domain.contains(np.asarray(x_prime, dtype=float))):
        raise KernelDomainError("The first collision point must lie in the domain")
    return double_scatter_values(pair, domain, tau, exit.x, exit.v, x_prime, v_prime, tube=tube, line=line)
