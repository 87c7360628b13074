"""X-ray transform samples of sigma on a parallel-beam line set.

Line (k, j) has direction theta_k = (cos phi_k, sin phi_k), phi_k = pi k / n_angles,
and passes through offset_j * n_k with n_k = (-sin phi_k, cos phi_k). Its entry
into X gives the boundary phase point (x'0, v'0) probed in measurement mode.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from core.config import InversionSettings, SceneSettings
from core.models import SinogramArtifact
from core.types import XRayMode
from core.utils import ordered_map
from transport_engine.coefficients import CoefficientPair, line_integral_sigma
from transport_engine.errors import GridMismatchError, ReconstructionError
from transport_engine.forward import BoundarySource, ForwardSolver
from transport_engine.geometry import Domain, LineQuadrature, PhasePoint
from transport_engine.inversion.ballistic import extract_ballistic

logger = logging.getLogger(__name__)

SINOGRAM_COLUMNS = ("angle_index", "offset_index", "angle", "offset", "value", "chord", "flagged")
MIN_CHORD = 1e-6


@dataclass(frozen=True, eq=False)
class ParallelBeamGeometry:
    """n_angles directions on [0, pi) times n_offsets uniform offsets on [-radius, radius]."""

    n_angles: int
    n_offsets: int
    radius: float

    def __post_init__(self):
        if self.n_angles < 1 or self.n_offsets < 2 or self.radius <= 0.0:
            raise ReconstructionError(
                f"Invalid parallel-beam geometry ({self.n_angles} angles, {self.n_offsets} offsets, R = {self.radius})"
            )

    @classmethod
    def covering(cls, domain: Domain, n_angles: int, n_offsets: int) -> "ParallelBeamGeometry":
        if domain.dimension != 2:
            raise ReconstructionError("Parallel-beam scans are planar")
        return cls(n_angles=n_angles, n_offsets=n_offsets, radius=max(domain.semi_axes))

    @property
    def angles(self) -> NDArray[np.float64]:
        return math.pi * np.arange(self.n_angles) / self.n_angles

    @property
    def offsets(self) -> NDArray[np.float64]:
        return np.linspace(-self.radius, self.radius, self.n_offsets)

    @property
    def spacing(self) -> float:
        return float(self.offsets[1] - self.offsets[0])

    @property
    def directions(self) -> NDArray[np.float64]:
        phi = self.angles
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    @property
    def normals(self) -> NDArray[np.float64]:
        phi = self.angles
        return np.stack([-np.sin(phi), np.cos(phi)], axis=-1)

    def line_points(self) -> NDArray[np.float64]:
        """Foot point offset_j * n_k of every line, shape (n_angles, n_offsets, 2)."""
        return self.offsets[None, :, None] * self.normals[:, None, :]

    def chords(self, domain: Domain) -> tuple[NDArray, NDArray, NDArray]:
        """Line parameters (s0, s1) of the intersection with X and the hit mask."""
        directions = np.broadcast_to(self.directions[:, None, :], (self.n_angles, self.n_offsets, 2))
        return domain.line_intersection(self.line_points(), directions)

    def entry(self, domain: Domain, angle_index: int, offset_index: int) -> Optional[PhasePoint]:
        """Incoming phase point of one line, None when the line misses X."""
        s0, _, hit = self.chords(domain)
        if not hit[angle_index, offset_index]:
            return None
        direction = self.directions[angle_index]
        point = self.line_points()[angle_index, offset_index] + s0[angle_index, offset_index] * direction
        return PhasePoint(point, direction)


@dataclass(frozen=True)
class XRaySample:
    """P sigma along one line; ``flagged`` marks samples whose value could not be trusted."""

    angle_index: int
    offset_index: int
    angle: float
    offset: float
    value: float
    chord: float
    flagged: bool = False
    reason: str = ""
    gate: Optional[tuple[float, float]] = None
    epsilon: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Line integrals on a parallel-beam geometry, shape (n_angles, n_offsets)."""

    geometry: ParallelBeamGeometry
    values: NDArray[np.float64]
    chords: NDArray[np.float64]
    flagged: NDArray[np.bool_]
    mode: XRayMode = XRayMode.ANALYTIC
    gates: Optional[NDArray[np.float64]] = None
    epsilon: Optional[float] = None
    reasons: dict[tuple[int, int], str] = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.geometry.n_angles, self.geometry.n_offsets)
        for name in ("values", "chords", "flagged"):
            if getattr(self, name).shape != shape:
                raise GridMismatchError(f"Sinogram {name} has shape {getattr(self, name).shape}, expected {shape}")

    def samples(self) -> Iterator[XRaySample]:
        angles, offsets = self.geometry.angles, self.geometry.offsets
        for k, j in np.ndindex(*self.values.shape):
            yield XRaySample(
                angle_index=k,
                offset_index=j,
                angle=float(angles[k]),
                offset=float(offsets[j]),
                value=float(self.values[k, j]),
                chord=float(self.chords[k, j]),
                flagged=bool(self.flagged[k, j]),
                reason=self.reasons.get((k, j), ""),
                gate=None if self.gates is None or self.flagged[k, j] else tuple(self.gates[k, j].tolist()),
                epsilon=self.epsilon,
            )

    def __add__(self, other: "Sinogram") -> "Sinogram":
        if self.values.shape != other.values.shape or self.geometry.radius != other.geometry.radius:
            raise GridMismatchError("Sinograms live on different geometries")
        return Sinogram(
            self.geometry, self.values + other.values, self.chords, self.flagged | other.flagged, self.mode
        )

    def to_rows(self) -> Iterator[dict[str, Any]]:
        for sample in self.samples():
            yield {
                "angle_index": sample.angle_index,
                "offset_index": sample.offset_index,
                "angle": sample.angle,
                "offset": sample.offset,
                "value": sample.value,
                "chord": sample.chord,
                "flagged": sample.flagged,
            }

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping[str, Any]], artifact: SinogramArtifact, radius: float) -> "Sinogram":
        geometry = ParallelBeamGeometry(artifact.angles, artifact.offsets, radius)
        shape = (artifact.angles, artifact.offsets)
        values, chords, flagged = np.zeros(shape), np.zeros(shape), np.zeros(shape, dtype=bool)
        for row in rows:
            k, j = int(row["angle_index"]), int(row["offset_index"])
            values[k, j] = float(row["value"])
            chords[k, j] = float(row["chord"])
            flagged[k, j] = str(row["flagged"]).lower() == "true"
        return cls(geometry, values, chords, flagged, XRayMode(artifact.mode))

    def artifact(self, config_hash: str = "", phantom_hash: str = "") -> SinogramArtifact:
        return SinogramArtifact(
            config_hash=config_hash,
            angles=self.geometry.n_angles,
            offsets=self.geometry.n_offsets,
            mode=self.mode.value,
            flagged=int(self.flagged.sum()),
            phantom_hash=phantom_hash,
        )


def analytic_line_integrals(
    pair: CoefficientPair,
    domain: Domain,
    geometry: ParallelBeamGeometry,
    line: Optional[LineQuadrature] = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """P sigma from the phantom's closed form (or the line quadrature), zero off X; returns values and chords."""
    s0, s1, hit = geometry.chords(domain)
    points = geometry.line_points()
    directions = np.broadcast_to(geometry.directions[:, None, :], points.shape)
    if pair.xray is not None:
        values = pair.xray(points, directions, s0, s1)
    else:
        values = line_integral_sigma(pair, domain, points, directions, s0, s1, line=line, check=False)
    return np.where(hit, values, 0.0), np.where(hit, s1 - s0, 0.0)


def _measure_line(
    solver: ForwardSolver,
    entry: PhasePoint,
    scene: SceneSettings,
    epsilon: float,
    order: int,
    gate_cells: int,
) -> tuple[float, str, Optional[tuple[float, float]]]:
    """-log of the ballistic extraction along one line, or a flag reason."""
    source = BoundarySource.mollified(
        solver.domain,
        entry,
        0.0 if scene.point_source else epsilon,
        epsilon,
        scene.source_duration,
        nodes=solver.quadrature.source_nodes,
    )
    try:
        response = solver.solve(source, scene.horizon, order=order)
        extraction = extract_ballistic(response, entry, source=source, gate_cells=gate_cells)
    except ReconstructionError as e:
        return 0.0, str(e), None
    if extraction.value <= 0.0:
        return 0.0, f"extracted value {extraction.value:.3g} has no logarithm", extraction.gate
    return extraction.exponent, "", extraction.gate


def xray_transform_scan(
    pair: CoefficientPair,
    domain: Domain,
    geometry: ParallelBeamGeometry,
    mode: XRayMode | str = XRayMode.ANALYTIC,
    solver: Optional[ForwardSolver] = None,
    scene: Optional[SceneSettings] = None,
    order: int = 0,
    gate_cells: int = 1,
    threads: Optional[int] = None,
) -> Sinogram:
    """P sigma for every line of ``geometry``.

    Analytic mode reads the phantom oracle. Measurement mode solves the forward
    problem for a source entering along each line and takes -log of the
    ballistic extraction at the finest mollifier width of the scene. Lines
    missing X give 0; tangent lines and failed extractions are flagged.
    """
    mode = XRayMode(mode)
    values, chords = analytic_line_integrals(pair, domain, geometry)
    flagged = np.zeros(values.shape, dtype=bool)
    if mode is XRayMode.ANALYTIC:
        grazing = (chords > 0.0) & (chords < MIN_CHORD)
        flagged |= grazing
        logger.info(f"Analytic sinogram {values.shape} for {pair.name or 'pair'}")
        return Sinogram(geometry, values, chords, flagged, mode)

    scene = scene or SceneSettings()
    solver = solver or ForwardSolver(pair, domain, threads=threads)
    epsilon = min(scene.mollifier_ladder)
    measured = np.zeros(values.shape)
    gates = np.full(values.shape + (2,), np.nan)
    reasons: dict[tuple[int, int], str] = {}
    lines = [(k, j) for k, j in np.ndindex(*values.shape) if chords[k, j] > 0.0]
    s0, _, _ = geometry.chords(domain)
    points = geometry.line_points()
    directions = geometry.directions

    def measure(index: tuple[int, int]) -> tuple[float, str, Optional[tuple[float, float]]]:
        k, j = index
        if chords[k, j] < MIN_CHORD:
            return 0.0, "tangent line", None
        entry = PhasePoint(points[k, j] + s0[k, j] * directions[k], directions[k])
        return _measure_line(solver, entry, scene, epsilon, order, gate_cells)

    for (k, j), (value, reason, gate) in zip(lines, ordered_map(measure, lines, threads)):
        measured[k, j] = value
        if gate is not None:
            gates[k, j] = gate
        if reason:
            flagged[k, j] = True
            reasons[(k, j)] = reason
            logger.debug(f"Flagged line ({k}, {j}): {reason}")
    if flagged.any():
        logger.warning(f"{int(flagged.sum())} of {len(lines)} measured lines were flagged and set to zero")
    logger.info(f"Measured sinogram {values.shape} for {pair.name or 'pair'} at eps = {epsilon:g}")
    return Sinogram(geometry, measured, chords, flagged, mode, gates=gates, epsilon=epsilon, reasons=reasons)


def scan_from_settings(
    pair: CoefficientPair,
    domain: Domain,
    settings: InversionSettings,
    solver: Optional[ForwardSolver] = None,
    scene: Optional[SceneSettings] = None,
    threads: Optional[int] = None,
) -> Sinogram:
    geometry = ParallelBeamGeometry.covering(domain, settings.n_angles, settings.n_offsets)
    return xray_transform_scan(
        pair,
        domain,
        geometry,
        mode=settings.mode,
        solver=solver,
        scene=scene,
        gate_cells=settings.gate_cells,
        threads=threads,
    )
