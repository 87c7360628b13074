"""Admissibility checks by dense sampling.

Sup-norms enter the stability constants, so both the sample maximum and a
safety-inflated value are reported.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from transport_engine.coefficients.fields import CoefficientPair
from transport_engine.geometry import Domain, SphereRule, SurfaceRule, VolumeRule

logger = logging.getLogger(__name__)


class AdmissibilityReport(BaseModel):
    """Sampled bounds of sigma, k and sigma_p for one coefficient pair."""

    name: str
    sigma_sup: float
    sigma_min: float
    kappa_sup: float
    kappa_min: float
    sigma_p_sup: float
    safety: float = Field(description="Factor applied to the sampled sup-norms")
    samples: int = Field(description="Number of (x, v', v) samples")
    violations: list[str] = Field(default_factory=list)
    membership_bound: Optional[float] = Field(default=None, description="Declared class bound M, if any")
    membership_passed: Optional[bool] = None

    @property
    def admissible(self) -> bool:
        return not self.violations

    @property
    def sigma_sup_safe(self) -> float:
        return self.safety * self.sigma_sup

    @property
    def kappa_sup_safe(self) -> float:
        return self.safety * self.kappa_sup

    @property
    def sigma_p_sup_safe(self) -> float:
        return self.safety * self.sigma_p_sup


def _sample_points(domain: Domain, refinement: int) -> np.ndarray:
    angular = 8 * refinement if domain.dimension == 2 else 2 * refinement
    radial = 4 * refinement if domain.dimension == 2 else 8
    interior = VolumeRule.build(domain, radial_nodes=radial, angle_nodes=angular).points
    boundary = SurfaceRule.build(domain, angular).points
    return np.concatenate([np.zeros((1, domain.dimension)), interior, boundary])


def check_admissible(
    pair: CoefficientPair,
    domain: Domain,
    refinement: int = 4,
    angle_nodes: int = 64,
    safety: float = 1.05,
) -> AdmissibilityReport:
    """Sample sigma, k and sigma_p; report maxima, sign violations and class membership."""
    points = _sample_points(domain, refinement)
    # d = 3 keeps the (x, v', v) tensor small
    sphere = SphereRule.build(domain.dimension, angle_nodes if domain.dimension == 2 else 12)
    directions = sphere.directions
    sigma_values = pair.sigma_at(points[:, None, :], directions[None, :, :])
    sigma_values = np.broadcast_to(sigma_values, (len(points), len(directions)))
    kappa_values = pair.kappa_at(points[:, None, None, :], directions[None, :, None, :], directions[None, None, :, :])
    kappa_values = np.broadcast_to(kappa_values, (len(points), len(directions), len(directions)))
    sigma_p_values = np.abs(kappa_values) @ sphere.weights

    violations: list[str] = []
    for label, values in (("sigma", sigma_values), ("k", kappa_values)):
        if not np.all(np.isfinite(values)):
            violations.append(f"{label} has non-finite samples")
        if np.min(values) < 0.0:
            violations.append(f"{label} is negative somewhere (min {np.min(values):.6g})")
    if not pair.kappa_bounded:
        violations.append("k is declared unbounded; bounded k is required")

    membership_bound = None
    membership_passed = None
    spec = pair.spec
    if spec is not None and spec.membership is not None:
        membership_bound = spec.membership.bound
        membership_passed = bool(pair.sigma_isotropic and np.max(sigma_p_values) <= membership_bound)

    report = AdmissibilityReport(
        name=pair.name,
        sigma_sup=float(np.max(np.abs(sigma_values))),
        sigma_min=float(np.min(sigma_values)),
        kappa_sup=float(np.max(np.abs(kappa_values))),
        kappa_min=float(np.min(kappa_values)),
        sigma_p_sup=float(np.max(sigma_p_values)),
        safety=safety,
        samples=int(kappa_values.size),
        violations=violations,
        membership_bound=membership_bound,
        membership_passed=membership_passed,
    )
    if violations:
        logger.warning(f"Phantom {pair.name}: {'; '.join(violations)}")
    logger.debug(f"Admissibility of {pair.name}: sigma_p sup {report.sigma_p_sup:.6g}")
    return report
