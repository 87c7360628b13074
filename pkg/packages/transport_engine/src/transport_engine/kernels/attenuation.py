"""Attenuation along broken rays.

E_+(x', v', s, w): enter at (x', v') on Gamma_-, travel s, turn into w and
leave. E_-(x, v, s, w): the same path read backwards from an exit (x, v) on
Gamma_+.
"""

from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core.types import BoundarySign
from transport_engine.coefficients import CoefficientPair, line_integral_sigma
from transport_engine.errors import KernelDomainError
from transport_engine.geometry import Domain, LineQuadrature, PhasePoint

RANGE_TOLERANCE = 1e-12


def broken_ray_attenuation(
    pair: CoefficientPair,
    domain: Domain,
    x0: ArrayLike,
    v0: ArrayLike,
    s: ArrayLike,
    w: ArrayLike,
    line: Optional[LineQuadrature] = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """E_+ for entries (x0, v0), depths s and outgoing directions w, without range checks.

    Returns the attenuation and the exit length tau_+(x0 + s v0, w) of the
    second leg. All arguments broadcast.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    turn = x0 + s[..., None] * v0
    exit_length = domain.exit_distance(turn, w)
    first = line_integral_sigma(pair, domain, x0, v0, np.zeros_like(s), s, line=line, check=False)
    second = line_integral_sigma(pair, domain, turn, w, np.zeros_like(exit_length), exit_length, line=line, check=False)
    return np.exp(-(first + second)), exit_length


def attenuation_E(
    pair: CoefficientPair,
    domain: Domain,
    entry: PhasePoint,
    s: ArrayLike,
    w: ArrayLike,
    sign: BoundarySign = BoundarySign.INCOMING,
    line: Optional[LineQuadrature] = None,
) -> NDArray[np.float64]:
    """E_+ for an entry on Gamma_- (sign incoming) or E_- for an exit on Gamma_+ (sign outgoing).

    Requires 0 <= s <= tau_+(entry) (resp. tau_-(exit)).
    """
    sign = BoundarySign(sign)
    s = np.asarray(s, dtype=float)
    if sign is BoundarySign.INCOMING:
        reach = float(domain.exit_distance(entry.x, entry.v))
        direction = entry.v
    else:
        reach = float(domain.exit_distance(entry.x, -entry.v))
        direction = -entry.v
    if np.any(s < -RANGE_TOLERANCE) or np.any(s > reach + RANGE_TOLERANCE):
        raise KernelDomainError(f"Depth must lie in [0, {reach:.6g}] along the entry ray")
    w = np.asarray(w, dtype=float)
    leg_direction = w if sign is BoundarySign.INCOMING else -w
    value, _ = broken_ray_attenuation(pair, domain, entry.x, direction, np.clip(s, 0.0, reach), leg_direction, line)
    return value
