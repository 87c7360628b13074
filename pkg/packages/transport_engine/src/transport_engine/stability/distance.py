"""Two-sided estimates of the operator distance ||A - A~||.

A delta source at (x'0, v'0) is mapped by A to a measure on (0, T) x Gamma_+
whose L^1 mass splits by collision order. The upper estimate sums the L^1
differences of those parts for each entry node and takes the sup over the
nodes; the orders the kernels leave out are covered by both tail bounds. The
lower estimate applies both operators to mollified probes.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.stats import qmc

from core.config import StabilitySettings
from core.models import OperatorDistance, ProbeRecord
from core.utils import ordered_map
from transport_engine.coefficients import CoefficientPair, line_integral_sigma
from transport_engine.errors import GeometryError, GridMismatchError
from transport_engine.forward import BoundarySource, ForwardSolver, double_scatter_masses
from transport_engine.geometry import BoundaryGrid, Domain, LineQuadrature, PhasePoint, SphereRule
from transport_engine.kernels import broken_ray_attenuation

logger = logging.getLogger(__name__)

MAX_INCIDENCE = 1.4


def _frame(normal: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    first = np.cross(normal, helper)
    first /= np.linalg.norm(first)
    return first, np.cross(normal, first)


def entry_nodes(
    domain: Domain, count: int, seed: int = 0, max_incidence: float = MAX_INCIDENCE
) -> list[PhasePoint]:
    """Incoming phase points spread by a scrambled Halton sequence, a normal-incidence node first.

    The incidence angle to the inward normal stays below ``max_incidence`` so
    that no node sits on a grazing chord.
    """
    if count < 1:
        return []
    if not 0.0 < max_incidence < 0.5 * math.pi:
        raise GeometryError(f"Maximum incidence must lie in (0, pi/2), got {max_incidence}")
    d = domain.dimension
    sampler = qmc.Halton(d=2 * (d - 1), scramble=True, seed=seed)
    first = np.array([[0.5, 0.5]]) if d == 2 else np.zeros((1, 4))
    u = np.concatenate([first, sampler.random(count - 1)])
    nodes = []
    for row in u:
        if d == 2:
            x = domain.boundary_point(2.0 * math.pi * row[0] - math.pi)
            inward = -domain.outward_normal(x)
            incidence = max_incidence * (2.0 * row[1] - 1.0)
            c, s = math.cos(incidence), math.sin(incidence)
            v = np.array([c * inward[0] - s * inward[1], s * inward[0] + c * inward[1]])
        else:
            x = domain.boundary_point(math.acos(1.0 - 2.0 * row[0]), 2.0 * math.pi * row[1])
            inward = -domain.outward_normal(x)
            e1, e2 = _frame(inward)
            incidence = max_incidence * row[2]
            azimuth = 2.0 * math.pi * row[3]
            v = math.cos(incidence) * inward + math.sin(incidence) * (
                math.cos(azimuth) * e1 + math.sin(azimuth) * e2
            )
        nodes.append(PhasePoint(x, v / np.linalg.norm(v)))
    return nodes


@dataclass(frozen=True)
class EntryDifference:
    """L^1 difference of the explicit parts of A delta_(x'0, v'0) and A~ delta_(x'0, v'0)."""

    ballistic: float
    single: float
    double: float

    @property
    def total(self) -> float:
        return self.ballistic + self.single + self.double


def ballistic_weights(
    pair: CoefficientPair, domain: Domain, entries: Sequence[PhasePoint], line: Optional[LineQuadrature] = None
) -> NDArray[np.float64]:
    """exp(-int_0^{tau_+} sigma) along the chord of every entry."""
    points = np.array([entry.x for entry in entries])
    directions = np.array([entry.v for entry in entries])
    reach = domain.exit_distance(points, directions)
    exponent = line_integral_sigma(
        pair, domain, points, directions, np.zeros_like(reach), reach, line=line, check=False
    )
    return np.exp(-exponent)


def single_scatter_difference(
    pair_a: CoefficientPair,
    pair_b: CoefficientPair,
    domain: Domain,
    entry: PhasePoint,
    sphere: SphereRule,
    ray_nodes: int = 8,
    panel_length: float = 0.5,
    line: Optional[LineQuadrature] = None,
) -> float:
    """int_S int_0^{tau_+} |k E_+ - k~ E~_+| ds dv for one entry."""
    if pair_a.kappa_vanishes and pair_b.kappa_vanishes:
        return 0.0
    reach = float(domain.exit_distance(entry.x, entry.v))
    if reach <= 0.0:
        return 0.0
    unit_nodes, unit_weights = LineQuadrature.for_length(reach, ray_nodes, panel_length).rule
    s = reach * unit_nodes[:, None]
    shape = (len(unit_nodes), sphere.size)
    directions = np.broadcast_to(sphere.directions[None, :, :], shape + (domain.dimension,))
    depths = np.broadcast_to(s, shape)
    turn = entry.x + depths[..., None] * entry.v

    def scattered(pair: CoefficientPair) -> NDArray[np.float64]:
        if pair.kappa_vanishes:
            return np.zeros(shape)
        attenuation, _ = broken_ray_attenuation(pair, domain, entry.x, entry.v, depths, directions, line)
        return pair.kappa_at(turn, entry.v, directions) * attenuation

    difference = np.abs(scattered(pair_a) - scattered(pair_b))
    return float(reach * unit_weights @ difference @ sphere.weights)


def double_scatter_difference(
    pair_a: CoefficientPair,
    pair_b: CoefficientPair,
    grid: BoundaryGrid,
    entry: PhasePoint,
    depth_nodes: int = 8,
    panel_length: float = 0.5,
    tube: float = 1e-4,
    line: Optional[LineQuadrature] = None,
) -> float:
    """L^1 distance of the binned two-collision masses of a unit point source emitted at t = 0."""
    if pair_a.kappa_vanishes and pair_b.kappa_vanishes:
        return 0.0

    def masses(pair: CoefficientPair) -> NDArray[np.float64]:
        if pair.kappa_vanishes:
            return np.zeros(grid.shape)
        return double_scatter_masses(
            pair,
            grid.domain,
            grid,
            entry,
            0.0,
            depth_nodes=depth_nodes,
            panel_length=panel_length,
            tube=tube,
            line=line,
        )

    return math.fsum(np.abs(masses(pair_a) - masses(pair_b)).ravel())


def entry_kernel_difference(
    solver_a: ForwardSolver,
    solver_b: ForwardSolver,
    grid: BoundaryGrid,
    entry: PhasePoint,
    ballistic: Optional[float] = None,
) -> EntryDifference:
    """Explicit kernel difference at one entry, with the quadrature settings of ``solver_a``."""
    domain = grid.domain
    quadrature = solver_a.quadrature
    if ballistic is None:
        weights = [ballistic_weights(solver.pair, domain, [entry]) for solver in (solver_a, solver_b)]
        ballistic = float(abs(weights[0][0] - weights[1][0]))
    sphere = SphereRule.build(domain.dimension, quadrature.angle_nodes)
    single = single_scatter_difference(
        solver_a.pair,
        solver_b.pair,
        domain,
        entry,
        sphere,
        ray_nodes=quadrature.ray_nodes,
        panel_length=quadrature.ray_panel_length,
    )
    double = double_scatter_difference(
        solver_a.pair,
        solver_b.pair,
        grid,
        entry,
        depth_nodes=solver_a.kernels.double_depth_nodes,
        panel_length=quadrature.ray_panel_length,
        tube=solver_a.kernels.singular_tube,
    )
    return EntryDifference(ballistic=ballistic, single=single, double=double)


def _probe_indices(values: Sequence[float], count: int) -> list[int]:
    """Leading Halton nodes for half the probes, the largest kernel differences for the rest."""
    if count <= 0 or not values:
        return []
    spread = list(range(min(count // 2, len(values))))
    ranked = [int(i) for i in np.argsort(-np.asarray(values), kind="stable")]
    chosen = list(spread)
    for index in ranked:
        if len(chosen) >= min(count, len(values)):
            break
        if index not in chosen:
            chosen.append(index)
    return chosen


def _probe(
    solver_a: ForwardSolver, solver_b: ForwardSolver, grid: BoundaryGrid, entry: PhasePoint, epsilon: float
) -> float:
    source = BoundarySource.mollified(
        grid.domain, entry, epsilon, epsilon, duration=epsilon, nodes=solver_a.quadrature.source_nodes
    )
    responses = [solver.solve(source, grid.horizon, order=2, grid=grid) for solver in (solver_a, solver_b)]
    return responses[0].difference_norm(responses[1]) / source.incoming_mass


def albedo_distance(
    solver_a: ForwardSolver,
    solver_b: ForwardSolver,
    horizon: float,
    entries: Sequence[PhasePoint],
    settings: Optional[StabilitySettings] = None,
    probes: Optional[int] = None,
    threads: Optional[int] = None,
) -> OperatorDistance:
    """Lower and upper estimates of ||A - A~|| for the pairs behind two solvers.

    ``probes`` overrides the probe count of ``settings``; zero probes give a
    lower estimate of 0 and skip the forward solves.
    """
    settings = settings or StabilitySettings()
    probes = settings.probe_count if probes is None else probes
    if solver_a.domain != solver_b.domain:
        raise GridMismatchError("Both pairs have to live on the same domain")
    grid = solver_a.grid(horizon)
    if not grid.same_discretization(solver_b.grid(horizon)):
        raise GridMismatchError("Both pairs have to be discretized on the same grid")

    domain = grid.domain
    weights_a = ballistic_weights(solver_a.pair, domain, entries)
    weights_b = ballistic_weights(solver_b.pair, domain, entries)
    differences = ordered_map(
        lambda i: entry_kernel_difference(
            solver_a, solver_b, grid, entries[i], ballistic=float(abs(weights_a[i] - weights_b[i]))
        ),
        range(len(entries)),
        threads,
    )
    entry_values = [difference.total for difference in differences]
    upper_explicit = max(entry_values, default=0.0)
    tail_a = solver_a.budget(horizon).tail_bound(2)
    tail_b = solver_b.budget(horizon).tail_bound(2)

    records = []
    for index in _probe_indices(entry_values, probes):
        entry = entries[index]
        value = _probe(solver_a, solver_b, grid, entry, settings.probe_epsilon)
        records.append(
            ProbeRecord(
                entry_index=index,
                point=entry.x.tolist(),
                direction=entry.v.tolist(),
                epsilon=settings.probe_epsilon,
                value=value,
            )
        )
    distance = OperatorDistance(
        lower=max((record.value for record in records), default=0.0),
        upper=upper_explicit + tail_a + tail_b,
        upper_explicit=upper_explicit,
        tail_bound_reference=tail_a,
        tail_bound_perturbed=tail_b,
        tolerance=settings.probe_tolerance,
        entries=len(entries),
        entry_values=entry_values,
        probes=records,
    )
    if not distance.consistent:
        logger.warning(f"Probe estimate {distance.lower:.6g} exceeds the upper estimate {distance.upper:.6g}")
    logger.info(
        f"||A - A~|| in [{distance.lower:.6g}, {distance.upper:.6g}] "
        f"(explicit {upper_explicit:.6g}, {len(entries)} entries, {len(records)} probes)"
    )
    return distance
