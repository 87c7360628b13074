import logging
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_engine.coefficients.fields import CoefficientPair
from transport_engine.errors import GeometryError
from transport_engine.geometry import Domain, LineQuadrature

logger = logging.getLogger(__name__)

SEGMENT_TOLERANCE = 1e-9


def line_integral_sigma(
    pair: CoefficientPair,
    domain: Domain,
    x: ArrayLike,
    v: ArrayLike,
    s0: ArrayLike,
    s1: ArrayLike,
    line: Optional[LineQuadrature] = None,
    check: bool = True,
) -> NDArray[np.float64]:
    """Integral of sigma(x + s v, v) over s in [s0, s1] by composite Gauss-Legendre.

    Negative ranges integrate backwards along the ray, so the backward leg
    int_0^t sigma(x - s v, v) ds is ``line_integral_sigma(pair, domain, x, v, -t, 0)``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    if check:
        start = x + s0[..., None] * v
        end = x + s1[..., None] * v
        if not (np.all(domain.contains(start, SEGMENT_TOLERANCE)) and np.all(domain.contains(end, SEGMENT_TOLERANCE))):
            raise GeometryError("Integration segment leaves the closure of the domain")
    length = s1 - s0
    if pair.sigma_constant is not None:
        return pair.sigma_constant * length
    line = line or LineQuadrature.for_length(domain.diameter)
    unit_nodes, unit_weights = line.rule
    s = s0[..., None] + length[..., None] * unit_nodes
    points = x[..., None, :] + s[..., None] * v[..., None, :]
    values = pair.sigma_at(points, np.broadcast_to(v[..., None, :], points.shape))
    return length * (values @ unit_weights)
