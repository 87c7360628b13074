"""Scattering-kernel extraction from single-scatter arrivals.

A particle entering at (x'0, v'0) that scatters once at depth s into v leaves
through x = x'0 + s v'0 + s' v at time s + s'. For a fixed outgoing direction
every boundary cell therefore sees one interval of depths, and its gated mass
is

    m(cell) ~ k(x'0 + s v'0, v'0, v) * |cell_v| * int_{s_lo}^{s_hi} E_+(s, v) ds

for a unit point source. Dividing by the attenuation integral, computed with
whichever sigma is supplied (exact or reconstructed), estimates k.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterator, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core.config import InversionSettings
from core.models import KappaSamplesArtifact
from transport_engine.coefficients import CoefficientPair
from transport_engine.errors import ReconstructionError
from transport_engine.forward import AlbedoResponse, BoundarySource, depth_intervals
from transport_engine.geometry import LineQuadrature, PhasePoint, gauss_legendre
from transport_engine.kernels import broken_ray_attenuation

logger = logging.getLogger(__name__)

KAPPA_COLUMNS = (
    "boundary_index",
    "angle_index",
    "depth",
    "depth_lo",
    "depth_hi",
    "direction",
    "value",
    "error_budget",
    "attenuation",
    "flagged",
)


def broken_ray_depths(
    x: ArrayLike, v: ArrayLike, x0: ArrayLike, v0: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Depths (s, s') with x = x0 + s v0 + s' v; NaN where v is parallel to v0.

    s = (x - x0).(v0 - c v) / (1 - c^2),  s' = (x - x0).(v - c v0) / (1 - c^2),  c = v.v0
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    c = np.sum(v * v0, axis=-1)
    gap = 1.0 - c * c
    offset = x - x0
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sum(offset * (v0 - c[..., None] * v), axis=-1) / gap
        s_out = np.sum(offset * (v - c[..., None] * v0), axis=-1) / gap
    regular = gap > 1e-14
    return np.where(regular, s, np.nan), np.where(regular, s_out, np.nan)


@dataclass(frozen=True)
class KappaSample:
    """k(x'0 + s v'0, v'0, v) averaged over the depth interval feeding one outgoing cell."""

    boundary_index: int
    angle_index: int
    depth: float
    depth_lo: float
    depth_hi: float
    direction: tuple[float, ...]
    value: float
    error_budget: float
    attenuation: float
    flagged: bool = False


@dataclass(frozen=True, eq=False)
class KappaSamples:
    entry: PhasePoint
    samples: list[KappaSample]
    sigma_source: str = "exact"

    def __len__(self) -> int:
        return len(self.samples)

    def accepted(self) -> list[KappaSample]:
        return [sample for sample in self.samples if not sample.flagged]

    def values(self) -> NDArray[np.float64]:
        return np.array([sample.value for sample in self.accepted()])

    def truth(self, pair: CoefficientPair) -> NDArray[np.float64]:
        """True k at every accepted sample location."""
        accepted = self.accepted()
        if not accepted:
            return np.zeros(0)
        depths = np.array([sample.depth for sample in accepted])
        directions = np.array([sample.direction for sample in accepted])
        points = self.entry.x + depths[:, None] * self.entry.v
        return pair.kappa_at(points, np.broadcast_to(self.entry.v, directions.shape), directions)

    def max_relative_error(self, pair: CoefficientPair) -> float:
        truth = self.truth(pair)
        if truth.size == 0:
            return math.nan
        scale = np.maximum(np.abs(truth), 1e-300)
        return float(np.max(np.abs(self.values() - truth) / scale))

    def to_rows(self) -> Iterator[dict[str, Any]]:
        for sample in self.samples:
            yield {
                "boundary_index": sample.boundary_index,
                "angle_index": sample.angle_index,
                "depth": sample.depth,
                "depth_lo": sample.depth_lo,
                "depth_hi": sample.depth_hi,
                "direction": math.atan2(sample.direction[1], sample.direction[0]),
                "value": sample.value,
                "error_budget": sample.error_budget,
                "attenuation": sample.attenuation,
                "flagged": sample.flagged,
            }

    def artifact(self, config_hash: str = "") -> KappaSamplesArtifact:
        return KappaSamplesArtifact(
            config_hash=config_hash,
            entry=self.entry.x.tolist() + self.entry.v.tolist(),
            samples=len(self.samples),
            sigma_source=self.sigma_source,
        )


def _cell_prefix(masses: NDArray[np.float64]) -> NDArray[np.float64]:
    """Cumulative masses over time with a leading zero row."""
    return np.concatenate([np.zeros((1,) + masses.shape[1:]), np.cumsum(masses, axis=0)], axis=0)


def extract_k(
    response: AlbedoResponse,
    entry: PhasePoint,
    sigma_pair: CoefficientPair,
    source: BoundarySource,
    cone_half_width: float = 0.1,
    gate_cells: int = 1,
    min_attenuation: float = 1e-8,
    depth_nodes: int = 3,
    line: Optional[LineQuadrature] = None,
    sigma_source: str = "exact",
) -> KappaSamples:
    """k samples off the ballistic direction from the single-scatter arrivals of ``response``.

    ``sigma_pair`` supplies the extinction used for E_+. Cells whose direction
    lies within ``cone_half_width`` of +-v'0 are skipped; samples with mean
    attenuation below ``min_attenuation`` are flagged. The error budget
    is the gated two-collision mass plus the tail bound over the same
    denominator.
    """
    grid = response.grid
    domain = grid.domain
    if grid.horizon <= 2.0 * domain.diameter:
        raise ReconstructionError(
            f"Scattering extraction needs T > 2 diam(X) = {2.0 * domain.diameter:g}, got {grid.horizon:g}"
        )
    if response.order < 1 or 1 not in response.masses:
        raise ReconstructionError("Scattering extraction needs the single-scatter part of the response")
    if source.phase is not None and source.epsilon >= cone_half_width:
        logger.warning(f"Source width {source.epsilon:g} is not below the exclusion cone {cone_half_width:g}")

    directions = grid.directions
    cosine = directions @ entry.v
    outside_cone = np.sqrt(np.maximum(1.0 - cosine**2, 0.0)) > math.sin(cone_half_width)

    nodes, weights = gauss_legendre(depth_nodes)
    shape = grid.shape[1:]
    denominator = np.zeros(shape)
    plain = np.zeros(shape)
    moment = np.zeros(shape)
    earliest = np.full(shape, np.inf)
    latest = np.full(shape, -np.inf)
    lowest = np.full(shape, np.inf)
    highest = np.full(shape, -np.inf)
    particles = source.particles()
    for x_p, v_p, m_p in zip(particles.points, particles.directions, particles.masses):
        reach = float(domain.exit_distance(x_p, v_p))
        boundary, angle, s_lo, s_hi = depth_intervals(domain, grid, x_p, v_p, reach)
        keep = outside_cone[angle]
        boundary, angle, s_lo, s_hi = boundary[keep], angle[keep], s_lo[keep], s_hi[keep]
        if boundary.size == 0:
            continue
        length = (s_hi - s_lo)[:, None]
        s = s_lo[:, None] + length * nodes[None, :]
        v = np.broadcast_to(directions[angle][:, None, :], s.shape + (2,))
        attenuation, exit_length = broken_ray_attenuation(sigma_pair, domain, x_p, v_p, s, v, line)
        quad = m_p * grid.angle_weights[angle][:, None] * length * weights[None, :]
        cell = (boundary, angle)
        np.add.at(denominator, cell, np.sum(quad * attenuation, axis=1))
        np.add.at(plain, cell, np.sum(quad, axis=1))
        np.add.at(moment, cell, np.sum(quad * attenuation * s, axis=1))
        ends = np.stack([s_lo, s_hi], axis=-1)
        end_exit = domain.exit_distance(x_p + ends[..., None] * v_p, directions[angle][:, None, :])
        delays = np.concatenate([s + exit_length, ends + end_exit], axis=1)
        np.minimum.at(earliest, cell, delays.min(axis=1))
        np.maximum.at(latest, cell, delays.max(axis=1))
        np.minimum.at(lowest, cell, s_lo)
        np.maximum.at(highest, cell, s_hi)

    live_b, live_a = np.nonzero(plain > 0.0)
    margin = 0.5 * gate_cells * grid.dt
    lower = np.maximum(earliest[live_b, live_a] - margin, 0.0)
    upper = np.minimum(latest[live_b, live_a] + source.temporal.width + margin, grid.horizon)
    first = np.clip(np.floor(lower / grid.dt).astype(int), 0, grid.time_bins)
    last = np.clip(np.ceil(upper / grid.dt).astype(int), 0, grid.time_bins)

    total = _cell_prefix(response.total())
    double = _cell_prefix(response.part(2))
    gated = total[last, live_b, live_a] - total[first, live_b, live_a]
    gated_double = double[last, live_b, live_a] - double[first, live_b, live_a]

    denom = denominator[live_b, live_a]
    mean_attenuation = denom / plain[live_b, live_a]
    flagged = mean_attenuation < min_attenuation
    safe = np.where(denom > 0.0, denom, 1.0)
    values = np.where(flagged, math.nan, gated / safe)
    budget = np.where(flagged, math.inf, (gated_double + response.tail_bound * response.incoming_mass) / safe)
    depth = np.where(denom > 0.0, moment[live_b, live_a] / safe, 0.5 * (lowest + highest)[live_b, live_a])

    samples = [
        KappaSample(
            boundary_index=int(b),
            angle_index=int(a),
            depth=float(depth[i]),
            depth_lo=float(lowest[b, a]),
            depth_hi=float(highest[b, a]),
            direction=tuple(directions[a].tolist()),
            value=float(values[i]),
            error_budget=float(budget[i]),
            attenuation=float(mean_attenuation[i]),
            flagged=bool(flagged[i]),
        )
        for i, (b, a) in enumerate(zip(live_b, live_a))
    ]
    if flagged.any():
        logger.warning(f"{int(flagged.sum())} scattering samples have attenuation below {min_attenuation:g}")
    logger.info(f"Extracted {len(samples) - int(flagged.sum())} scattering samples with {sigma_source} sigma")
    return KappaSamples(entry=entry, samples=samples, sigma_source=sigma_source)


def extract_k_from_settings(
    response: AlbedoResponse,
    entry: PhasePoint,
    sigma_pair: CoefficientPair,
    source: BoundarySource,
    settings: InversionSettings,
    depth_nodes: int = 3,
    sigma_source: str = "exact",
) -> KappaSamples:
    return extract_k(
        response,
        entry,
        sigma_pair,
        source,
        cone_half_width=settings.cone_half_width,
        gate_cells=settings.gate_cells,
        min_attenuation=settings.min_attenuation,
        depth_nodes=depth_nodes,
        sigma_source=sigma_source,
    )
