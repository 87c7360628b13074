"""Per-entry stability rows.

For every entry node (x'0, v'0) on Gamma_-:

- attenuation: |exp(-P sigma) - exp(-P sigma~)| <= ||A - A~||   (needs T > diam X)
- scattering: int_S int_0^{tau_+} |k - k~| E_+ ds dv
      <= tau_+ sup_s sigma~_p sup_{s, v} |E_+ - E~_+| + ||A - A~||   (needs T > 2 diam X)

The left-hand sides use the analytic coefficients; the operator distance is
the upper estimate of ``albedo_distance``.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from core.config import QuadratureSettings, StabilitySettings
from core.models import OperatorDistance, StabilityRow
from core.types import IntegrationRoute
from core.utils import ordered_map
from transport_engine.coefficients import CoefficientPair, line_integral_sigma, sigma_p
from transport_engine.errors import GeometryError
from transport_engine.geometry import Domain, LineQuadrature, PhasePoint, SphereRule, phase_space_integral
from transport_engine.kernels import broken_ray_attenuation

logger = logging.getLogger(__name__)

CLOSED_CHORD_SAMPLES = 33


@dataclass(frozen=True, eq=False)
class ChordRule:
    """Depth quadrature along the chord of one entry times a sphere rule for the outgoing direction."""

    entry: PhasePoint
    reach: float
    depths: NDArray[np.float64]
    weights: NDArray[np.float64]
    sphere: SphereRule

    @classmethod
    def build(cls, domain: Domain, entry: PhasePoint, quadrature: Optional[QuadratureSettings] = None) -> "ChordRule":
        quadrature = quadrature or QuadratureSettings()
        reach = float(domain.exit_distance(entry.x, entry.v))
        nodes, weights = LineQuadrature.for_length(reach, quadrature.ray_nodes, quadrature.ray_panel_length).rule
        return cls(
            entry=entry,
            reach=reach,
            depths=reach * nodes,
            weights=reach * weights,
            sphere=SphereRule.build(domain.dimension, quadrature.angle_nodes),
        )

    def closed_depths(self, count: int = CLOSED_CHORD_SAMPLES) -> NDArray[np.float64]:
        """Depths covering the closed chord [0, tau_+], endpoints included."""
        return np.linspace(0.0, self.reach, count)

    def mesh(self, depths: NDArray[np.float64]) -> tuple[NDArray, NDArray, NDArray]:
        """Depths, turning points and outgoing directions on depths x sphere."""
        shape = (len(depths), self.sphere.size)
        s = np.broadcast_to(depths[:, None], shape)
        directions = np.broadcast_to(self.sphere.directions[None, :, :], shape + (self.entry.x.size,))
        return s, self.entry.x + s[..., None] * self.entry.v, directions


def chord_integrals(
    pair: CoefficientPair, domain: Domain, entries: Sequence[PhasePoint]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """P sigma along every entry chord from the closed form when the phantom has one, and the chord lengths."""
    points = np.array([entry.x for entry in entries])
    directions = np.array([entry.v for entry in entries])
    reach = domain.exit_distance(points, directions)
    start = np.zeros_like(reach)
    if pair.xray is not None:
        return np.asarray(pair.xray(points, directions, start, reach), dtype=float), reach
    return line_integral_sigma(pair, domain, points, directions, start, reach, check=False), reach


def kernel_difference_l1(
    pair_a: CoefficientPair,
    pair_b: CoefficientPair,
    domain: Domain,
    rule: ChordRule,
    weight: Optional[CoefficientPair] = None,
) -> float:
    """int_S int_0^{tau_+} |k - k~| ds dv, weighted by E_+ of ``weight`` when given."""
    s, turn, directions = rule.mesh(rule.depths)
    entry = rule.entry
    difference = np.abs(pair_a.kappa_at(turn, entry.v, directions) - pair_b.kappa_at(turn, entry.v, directions))
    if weight is not None and np.any(difference > 0.0):
        attenuation, _ = broken_ray_attenuation(weight, domain, entry.x, entry.v, s, directions)
        difference = difference * attenuation
    return float(rule.weights @ difference @ rule.sphere.weights)


def attenuation_sup_difference(
    pair_a: CoefficientPair, pair_b: CoefficientPair, domain: Domain, rule: ChordRule, count: int = CLOSED_CHORD_SAMPLES
) -> float:
    """sup over the closed chord and the sphere of |E_+ - E~_+|."""
    s, _, directions = rule.mesh(rule.closed_depths(count))
    entry = rule.entry
    first, _ = broken_ray_attenuation(pair_a, domain, entry.x, entry.v, s, directions)
    second, _ = broken_ray_attenuation(pair_b, domain, entry.x, entry.v, s, directions)
    return float(np.max(np.abs(first - second)))


def scattering_sup(
    pair: CoefficientPair, rule: ChordRule, angle_nodes: int = 256, count: int = CLOSED_CHORD_SAMPLES
) -> float:
    """sup over the closed chord of sigma_p(x'0 + s v'0, v'0)."""
    if pair.kappa_vanishes:
        return 0.0
    depths = rule.closed_depths(count)
    points = rule.entry.x + depths[:, None] * rule.entry.v
    v_in = np.broadcast_to(rule.entry.v, points.shape)
    return float(np.max(sigma_p(pair, points, v_in, angle_nodes=angle_nodes)))


def global_kernel_difference(
    pair_a: CoefficientPair,
    pair_b: CoefficientPair,
    domain: Domain,
    route: IntegrationRoute | str = IntegrationRoute.BOUNDARY_INCOMING,
    angle_nodes: int = 64,
    boundary_nodes: int = 64,
    radial_nodes: int = 16,
) -> float:
    """||k - k~||_{L^1(X x S x S)}; the incoming-boundary route integrates along every chord with d xi ds."""
    sphere = SphereRule.build(domain.dimension, angle_nodes)

    def integrand(x: NDArray, v_in: NDArray) -> NDArray:
        x_out = x[..., None, :]
        v_rep = v_in[..., None, :]
        difference = pair_a.kappa_at(x_out, v_rep, sphere.directions) - pair_b.kappa_at(x_out, v_rep, sphere.directions)
        return np.abs(difference) @ sphere.weights

    return phase_space_integral(
        integrand,
        domain,
        route=route,
        radial_nodes=radial_nodes,
        boundary_nodes=boundary_nodes,
        angle_nodes=angle_nodes,
        line=LineQuadrature.for_length(domain.diameter, 8, 0.5),
    )


def change_of_variables_row(
    pair_a: CoefficientPair, pair_b: CoefficientPair, domain: Domain, tolerance: float = 1e-3
) -> StabilityRow:
    """The boundary route and the volume route of ||k - k~||_{L^1} agree (relative ``tolerance``)."""
    boundary = global_kernel_difference(pair_a, pair_b, domain, IntegrationRoute.BOUNDARY_INCOMING)
    volume = global_kernel_difference(pair_a, pair_b, domain, IntegrationRoute.VOLUME)
    return StabilityRow(
        name="change-of-variables",
        lhs=abs(boundary - volume),
        rhs=0.0,
        tolerance=tolerance * (1.0 + volume),
        constants={"boundary_route": boundary, "volume_route": volume},
    )


def _require_horizon(domain: Domain, horizon: float, multiple: float) -> None:
    if horizon <= multiple * domain.diameter:
        raise GeometryError(
            f"This estimate needs T > {multiple:g} diam(X) = {multiple * domain.diameter:g}, got T = {horizon:g}"
        )


def check_attenuation_stability(
    pair_a: CoefficientPair,
    pair_b: CoefficientPair,
    domain: Domain,
    entries: Sequence[PhasePoint],
    distance: OperatorDistance,
    horizon: float,
    settings: Optional[StabilitySettings] = None,
) -> list[StabilityRow]:
    """One ``attenuation`` row per entry, plus an ``attenuation-probe`` row where a probe sat on that entry."""
    settings = settings or StabilitySettings()
    _require_horizon(domain, horizon, 1.0)
    integrals_a, reach = chord_integrals(pair_a, domain, entries)
    integrals_b, _ = chord_integrals(pair_b, domain, entries)
    lhs = np.abs(np.exp(-integrals_a) - np.exp(-integrals_b))
    rows = []
    for index in range(len(entries)):
        constants = {"chord": float(reach[index]), "p_sigma": float(integrals_a[index])}
        rows.append(
            StabilityRow(
                name="attenuation",
                entry_index=index,
                lhs=float(lhs[index]),
                rhs=distance.upper,
                tolerance=settings.row_tolerance,
                constants=constants,
            )
        )
        probe = distance.probe_value(index)
        if probe is not None:
            rows.append(
                StabilityRow(
                    name="attenuation-probe",
                    entry_index=index,
                    lhs=float(lhs[index]),
                    rhs=probe,
                    tolerance=settings.probe_tolerance,
                    constants=constants,
                )
            )
    return rows


def check_scattering_stability(
    pair_a: CoefficientPair,
    pair_b: CoefficientPair,
    domain: Domain,
    entries: Sequence[PhasePoint],
    distance: OperatorDistance,
    horizon: float,
    settings: Optional[StabilitySettings] = None,
    quadrature: Optional[QuadratureSettings] = None,
    threads: Optional[int] = None,
) -> list[StabilityRow]:
    """One ``scattering`` row per entry; the sups run over the closed chord."""
    settings = settings or StabilitySettings()
    _require_horizon(domain, horizon, 2.0)

    def row(index: int) -> StabilityRow:
        rule = ChordRule.build(domain, entries[index], quadrature)
        lhs = kernel_difference_l1(pair_a, pair_b, domain, rule, weight=pair_a)
        sup_sigma_p = scattering_sup(pair_b, rule)
        sup_attenuation = attenuation_sup_difference(pair_a, pair_b, domain, rule)
        first = rule.reach * sup_sigma_p * sup_attenuation
        return StabilityRow(
            name="scattering",
            entry_index=index,
            lhs=lhs,
            rhs=first + distance.upper,
            tolerance=settings.row_tolerance,
            constants={
                "chord": rule.reach,
                "sup_sigma_p": sup_sigma_p,
                "sup_attenuation_difference": sup_attenuation,
                "distance": distance.upper,
            },
        )

    rows = ordered_map(row, range(len(entries)), threads)
    failed = sum(not r.passed for r in rows)
    if failed:
        logger.warning(f"{failed} of {len(rows)} scattering rows failed")
    return rows
