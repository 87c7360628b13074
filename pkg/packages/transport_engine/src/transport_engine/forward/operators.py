"""The explicit pieces of the transport semigroup.

- lift_source: the boundary lifting G_-(t) phi (and its time-independent factors)
- apply_U1: free streaming with absorption, U_1(t)
- apply_A2: the scattering gain A_2
"""

from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_engine.coefficients import CoefficientPair, line_integral_sigma
from transport_engine.forward.source import BoundarySource
from transport_engine.geometry import Domain, LineQuadrature, PhaseField, SphereRule

TimedPhaseField = Callable[[ArrayLike, NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]


def lifting_factors(
    pair: CoefficientPair,
    domain: Domain,
    source: BoundarySource,
    x: NDArray[np.float64],
    v: NDArray[np.float64],
    line: Optional[LineQuadrature] = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Time-independent parts of the lifting: tau_-(x, v) and exp(-int_0^{tau_-} sigma) f(x - tau_- v, v).

    Since phi = g(t) f(x', v'), G_-(t) phi (x, v) = amplitude * g(t - back).
    """
    x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
    back = domain.exit_distance(x, -v)
    amplitude = np.asarray(source.phase_density(x - back[..., None] * v, v), dtype=float)
    amplitude = np.array(np.broadcast_to(amplitude, back.shape))
    live = amplitude > 0.0
    if np.any(live):
        count = int(np.sum(live))
        exponent = line_integral_sigma(
            pair, domain, x[live], v[live], -back[live], np.zeros(count), line=line, check=False
        )
        amplitude[live] = np.exp(-exponent) * amplitude[live]
    return back, amplitude


def lift_source(
    pair: CoefficientPair,
    domain: Domain,
    source: BoundarySource,
    line: Optional[LineQuadrature] = None,
) -> TimedPhaseField:
    """G_-(t) phi (x, v) = exp(-int_0^{tau_-} sigma) phi(t - tau_-(x, v), x - tau_-(x, v) v, v).

    phi is extended by zero outside (0, eta), so negative times give 0.
    """

    def lifted(t: ArrayLike, x: NDArray, v: NDArray) -> NDArray[np.float64]:
        back, amplitude = lifting_factors(pair, domain, source, x, v, line=line)
        t = np.asarray(t, dtype=float)
        return amplitude * source.temporal(t - back)

    return lifted


def apply_U1(
    pair: CoefficientPair,
    domain: Domain,
    f: PhaseField,
    t: float,
    line: Optional[LineQuadrature] = None,
) -> PhaseField:
    """U_1(t) f (x, v) = exp(-int_0^t sigma(x - s v, v) ds) f(x - t v, v) theta(x - t v, x)."""
    if t < 0.0:
        raise ValueError(f"U_1 is defined for t >= 0, got {t}")

    def streamed(x: NDArray, v: NDArray) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        x, v = np.broadcast_arrays(x, v)
        origin = x - t * v
        # the segment [x - t v, x] lies in the convex domain iff both ends do
        inside = domain.contains(origin) & domain.contains(x)
        result = np.zeros(x.shape[:-1])
        if not np.any(inside):
            return result
        if t == 0.0:
            result[inside] = np.asarray(f(x[inside], v[inside]), dtype=float)
            return result
        count = int(np.sum(inside))
        exponent = line_integral_sigma(
            pair, domain, x[inside], v[inside], np.full(count, -t), np.zeros(count), line=line, check=False
        )
        result[inside] = np.exp(-exponent) * np.asarray(f(origin[inside], v[inside]), dtype=float)
        return result

    return streamed


def kernel_matrix(pair: CoefficientPair, x: ArrayLike, sphere: SphereRule) -> NDArray[np.float64]:
    """k(x, v_a, v_b) w_a on the sphere rule, shape (..., incoming a, outgoing b)."""
    x = np.asarray(x, dtype=float)
    dirs = sphere.directions
    values = pair.kappa_at(x[..., None, None, :], dirs[:, None, :], dirs[None, :, :])
    values = np.broadcast_to(values, x.shape[:-1] + (sphere.size, sphere.size))
    return values * sphere.weights[:, None]


def apply_A2(pair: CoefficientPair, f: PhaseField, sphere: SphereRule) -> PhaseField:
    """A_2 f (x, v) = int k(x, v', v) f(x, v') dv' with the sphere rule in v'."""
    dirs = sphere.directions

    def scattered(x: NDArray, v: NDArray) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        x, v = np.broadcast_arrays(x, v)
        incoming = np.asarray(f(x[..., None, :], np.broadcast_to(dirs, x.shape[:-1] + dirs.shape)), dtype=float)
        kernel = pair.kappa_at(x[..., None, :], dirs, v[..., None, :])
        kernel = np.broadcast_to(kernel, incoming.shape)
        return np.sum(kernel * incoming * sphere.weights, axis=-1)

    return scattered
