from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from transport_engine.coefficients import CoefficientPair
from transport_engine.errors import KernelDomainError
from transport_engine.geometry import Domain, LineQuadrature, PhasePoint
from transport_engine.kernels.attenuation import broken_ray_attenuation
from transport_engine.kernels.ballistic import require_boundary


@dataclass(frozen=True, eq=False)
class SingleScatterSample:
    """One point of the single-scattering sheet: scatter at depth s into v, leave at exit_point after delay."""

    entry: PhasePoint
    depth: float
    direction: NDArray[np.float64]
    exit_point: NDArray[np.float64]
    delay: float
    density: float


def single_scatter_density(
    pair: CoefficientPair,
    domain: Domain,
    entry: PhasePoint,
    s: float,
    v: NDArray[np.float64],
    cutoff: float = 1e-6,
    line: Optional[LineQuadrature] = None,
) -> SingleScatterSample:
    """Density k(x' + s v', v', v) E_+(x', v', s, v) and the exit event of the scattered particle."""
    require_boundary(domain, entry, outgoing=False, cutoff=cutoff)
    reach = float(domain.exit_distance(entry.x, entry.v))
    if not 0.0 <= s <= reach:
        raise KernelDomainError(f"Scattering depth {s} outside (0, {reach:.6g})")
    v = np.asarray(v, dtype=float)
    turn = entry.x + s * entry.v
    attenuation, exit_length = broken_ray_attenuation(pair, domain, entry.x, entry.v, np.asarray(s), v, line)
    density = float(pair.kappa_at(turn, entry.v, v) * attenuation)
    return SingleScatterSample(
        entry=entry,
        depth=float(s),
        direction=v,
        exit_point=turn + float(exit_length) * v,
        delay=float(s + exit_length),
        density=density,
    )
