"""Stability over the smoothness class: sigma in H^{d/2 + r_tilde} with norm and sigma_p bounded by M.

The trace and Radon-norm constants of the estimates have no closed form, so
the check is two-tier:

- chain: every link whose constant is explicit (Sobolev embedding, chord
  bound, mean-value lower bounds, attenuation difference) is evaluated
  directly, with D3 estimated from the phantoms themselves;
- scaling: along a perturbation ladder, ||sigma - sigma~||_{H^s} / ||A - A~||^kappa
  (and the kernel analogues) may not grow.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from core.config import QuadratureSettings, StabilitySettings
from core.models import OperatorDistance, PhantomPairSpec, StabilityRow
from core.utils import ordered_map
from transport_engine.coefficients import CoefficientPair, check_admissible, perturbation_ladder
from transport_engine.errors import MembershipError
from transport_engine.forward import ForwardSolver
from transport_engine.geometry import Domain, PhasePoint
from transport_engine.stability.distance import albedo_distance
from transport_engine.stability.pointwise import (
    ChordRule,
    attenuation_sup_difference,
    change_of_variables_row,
    chord_integrals,
    global_kernel_difference,
    kernel_difference_l1,
    scattering_sup,
)
from transport_engine.stability.sobolev import (
    SobolevGrid,
    embedding_constant,
    interpolation_check,
    interpolation_exponents,
    kernel_stability_exponent,
    sigma_stability_exponent,
)

logger = logging.getLogger(__name__)

SCALING_VARIATION = 2.0


def class_membership(pair_a: CoefficientPair, pair_b: CoefficientPair) -> tuple[float, float]:
    """(M, r_tilde) shared by both phantoms: the larger bound and the smaller smoothness."""
    memberships = []
    for pair in (pair_a, pair_b):
        if pair.spec is None or pair.spec.membership is None:
            raise MembershipError(f"Phantom {pair.name or 'pair'} declares no class membership (M, r_tilde)")
        memberships.append(pair.spec.membership)
    return max(m.bound for m in memberships), min(m.smoothness for m in memberships)


def check_sobolev_stability(
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
    """Chain rows for one pair; the kernel links need T > 2 diam(X) and are skipped otherwise."""
    settings = settings or StabilitySettings()
    declared, r_tilde = class_membership(pair_a, pair_b)
    d = domain.dimension
    s, r = settings.sobolev_order, settings.kernel_order
    kappa_sigma = sigma_stability_exponent(s, r_tilde, d)
    kappa_kernel = kernel_stability_exponent(r, r_tilde, d)
    top = 0.5 * d + r_tilde

    grid_a = SobolevGrid.sample(pair_a.sigma_at, domain, settings.sobolev_grid)
    grid_b = SobolevGrid.sample(pair_b.sigma_at, domain, settings.sobolev_grid)
    delta = grid_a - grid_b
    norms = [grid_a.norm(top), grid_b.norm(top)]
    sigma_p_sup = max(check_admissible(pair, domain).sigma_p_sup for pair in (pair_a, pair_b))
    bound = max(declared, *norms, sigma_p_sup)
    if bound > declared:
        logger.warning(
            f"Declared class bound M = {declared:g} is below the measured norms "
            f"(H^{top:g}: {max(norms):.4g}, sigma_p: {sigma_p_sup:.4g}); using M = {bound:.4g}"
        )
    d3 = embedding_constant([grid_a, grid_b, delta], r_tilde, settings.embedding_safety)
    diameter = domain.diameter
    lower_factor = math.exp(-diameter * d3 * bound)
    growth = math.exp(2.0 * diameter * d3 * bound)
    sup_delta = delta.sup()
    constants = {
        "M": bound,
        "M_declared": declared,
        "r_tilde": r_tilde,
        "s": s,
        "r": r,
        "kappa_sigma": kappa_sigma,
        "kappa_kernel": kappa_kernel,
        "D3": d3,
    }
    tolerance = settings.row_tolerance

    rows = [
        StabilityRow(
            name="embedding",
            lhs=grid.sup(),
            rhs=d3 * norm,
            tolerance=tolerance,
            constants={**constants, "sobolev_norm": norm},
        )
        for grid, norm in zip((grid_a, grid_b), norms)
    ]
    interpolation = interpolation_check(delta, s, r_tilde)
    rows.append(interpolation.model_copy(update={"constants": {**constants, **interpolation.constants}}))
    high, _ = interpolation_exponents(s, r_tilde, d)
    rows.append(
        StabilityRow(
            name="sobolev-estimate",
            lhs=delta.norm(s),
            rhs=(2.0 * bound) ** high * delta.norm(-0.5) ** kappa_sigma,
            tolerance=tolerance,
            constants=constants,
        )
    )

    integrals_a, reach = chord_integrals(pair_a, domain, entries)
    integrals_b, _ = chord_integrals(pair_b, domain, entries)
    for index in range(len(entries)):
        a, b = float(integrals_a[index]), float(integrals_b[index])
        entry_constants = {**constants, "chord": float(reach[index])}
        rows.extend(
            [
                StabilityRow(
                    name="chord-bound",
                    entry_index=index,
                    lhs=max(a, b),
                    rhs=diameter * d3 * bound,
                    tolerance=tolerance,
                    constants=entry_constants,
                ),
                StabilityRow(
                    name="attenuation-lower",
                    entry_index=index,
                    lhs=abs(math.exp(-a) - math.exp(-b)),
                    rhs=lower_factor * abs(a - b),
                    tolerance=tolerance,
                    lower_bound=True,
                    constants=entry_constants,
                ),
                StabilityRow(
                    name="xray-chain",
                    entry_index=index,
                    lhs=abs(a - b),
                    rhs=distance.upper / lower_factor,
                    tolerance=tolerance,
                    constants=entry_constants,
                ),
            ]
        )

    if horizon <= 2.0 * diameter:
        logger.info(f"T = {horizon:g} <= 2 diam(X): kernel links skipped")
        return rows

    def kernel_rows(index: int) -> list[StabilityRow]:
        rule = ChordRule.build(domain, entries[index], quadrature)
        plain = kernel_difference_l1(pair_a, pair_b, domain, rule)
        weighted = kernel_difference_l1(pair_a, pair_b, domain, rule, weight=pair_a)
        sup_sigma_p = scattering_sup(pair_b, rule)
        sup_attenuation = attenuation_sup_difference(pair_a, pair_b, domain, rule)
        entry_constants = {**constants, "chord": rule.reach, "sup_sigma_p": sup_sigma_p}
        return [
            StabilityRow(
                name="kernel-attenuation-lower",
                entry_index=index,
                lhs=weighted,
                rhs=plain / growth,
                tolerance=tolerance,
                lower_bound=True,
                constants=entry_constants,
            ),
            StabilityRow(
                name="attenuation-difference",
                entry_index=index,
                lhs=sup_sigma_p * sup_attenuation,
                rhs=2.0 * diameter * bound * growth * sup_delta,
                tolerance=tolerance,
                constants={**entry_constants, "sup_sigma_difference": sup_delta},
            ),
            StabilityRow(
                name="kernel-chain",
                entry_index=index,
                lhs=plain,
                rhs=growth * (rule.reach * sup_sigma_p * sup_attenuation + distance.upper),
                tolerance=tolerance,
                constants=entry_constants,
            ),
        ]

    for chunk in ordered_map(kernel_rows, range(len(entries)), threads):
        rows.extend(chunk)
    global_row = change_of_variables_row(pair_a, pair_b, domain)
    rows.append(global_row.model_copy(update={"constants": {**constants, **global_row.constants}}))
    return rows


@dataclass(frozen=True)
class LadderRung:
    """Both sides of the smoothness-class estimates for one perturbation size."""

    delta: float
    distance: float
    sigma_difference: float
    kernel_difference: float
    kernel_global: float


def run_perturbation_ladder(
    pair: PhantomPairSpec,
    deltas: Sequence[float],
    domain: Domain,
    horizon: float,
    entries: Sequence[PhasePoint],
    solver_factory: Callable[[CoefficientPair], ForwardSolver],
    settings: Optional[StabilitySettings] = None,
    quadrature: Optional[QuadratureSettings] = None,
    threads: Optional[int] = None,
) -> list[LadderRung]:
    """Reference against sigma scaled by 1 + delta, one rung per delta, with the tail-free distance."""
    settings = settings or StabilitySettings()
    rungs = []
    reference = CoefficientPair.from_spec(pair.reference)
    reference_solver = solver_factory(reference)
    reference_grid = SobolevGrid.sample(reference.sigma_at, domain, settings.sobolev_grid)
    rules = [ChordRule.build(domain, entry, quadrature) for entry in entries]
    for delta, rung in zip(deltas, perturbation_ladder(pair, deltas)):
        perturbed = CoefficientPair.from_spec(rung.perturbed)
        distance = albedo_distance(
            reference_solver, solver_factory(perturbed), horizon, entries, settings, probes=0, threads=threads
        )
        perturbed_grid = SobolevGrid.sample(perturbed.sigma_at, domain, settings.sobolev_grid)
        sigma_difference = (reference_grid - perturbed_grid).norm(settings.sobolev_order)
        kernel_difference = max(
            (kernel_difference_l1(reference, perturbed, domain, rule) for rule in rules), default=0.0
        )
        rungs.append(
            LadderRung(
                delta=float(delta),
                distance=distance.upper_explicit,
                sigma_difference=sigma_difference,
                kernel_difference=kernel_difference,
                kernel_global=global_kernel_difference(reference, perturbed, domain),
            )
        )
        logger.info(
            f"Ladder rung {rungs[-1].delta:g}: distance {distance.upper_explicit:.6g}, "
            f"H^{settings.sobolev_order:g} difference {sigma_difference:.6g}"
        )
    return rungs


def _variation(ratios: Sequence[float]) -> float:
    """Largest ratio over the first one; 0 when everything vanishes."""
    if not ratios or max(ratios) == 0.0:
        return 0.0
    if ratios[0] == 0.0:
        return math.inf
    return max(ratios) / ratios[0]


def _ratio(lhs: float, scale: float) -> float:
    if lhs == 0.0:
        return 0.0
    return lhs / scale if scale > 0.0 else math.inf


def scaling_rows(
    rungs: Sequence[LadderRung],
    s: float,
    r: float,
    r_tilde: float,
    dimension: int,
    limit: float = SCALING_VARIATION,
) -> list[StabilityRow]:
    """LHS / ||A - A~||^kappa (times 1 + ||A - A~||^{1 - kappa} for k) may not grow along the ladder."""
    kappa_sigma = sigma_stability_exponent(s, r_tilde, dimension)
    kappa_kernel = kernel_stability_exponent(r, r_tilde, dimension)
    families = {
        "scaling-sigma": ([rung.sigma_difference for rung in rungs], lambda x: x**kappa_sigma, kappa_sigma),
        "scaling-kernel": (
            [rung.kernel_difference for rung in rungs],
            lambda x: x**kappa_kernel * (1.0 + x ** (1.0 - kappa_kernel)),
            kappa_kernel,
        ),
        "scaling-kernel-global": (
            [rung.kernel_global for rung in rungs],
            lambda x: x**kappa_kernel * (1.0 + x ** (1.0 - kappa_kernel)),
            kappa_kernel,
        ),
    }
    rows = []
    for name, (values, scale, kappa) in families.items():
        ratios = [_ratio(value, scale(rung.distance)) for value, rung in zip(values, rungs)]
        rows.append(
            StabilityRow(
                name=name,
                lhs=_variation(ratios),
                rhs=limit,
                constants={
                    "kappa": kappa,
                    "rungs": float(len(rungs)),
                    "ratio_first": ratios[0] if ratios else 0.0,
                    "ratio_last": ratios[-1] if ratios else 0.0,
                },
            )
        )
    return rows
