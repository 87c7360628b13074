"""Constants bounding everything the closed-form kernels leave out.

Two certified routes bound the outgoing mass of collision orders above N per
unit incoming mass, with x = T ||sigma_p||:

- the collision series: e^x - sum_{n <= N} x^n / n!
- the remainder constant: an L^p bound on the multiple-scattering kernel,
  turned into an L^1 mass bound with Hoelder on (0, T) x Gamma_+.

The tail bound is the smaller of the two.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from scipy import special

from core.config import KernelSettings
from transport_engine.coefficients import AdmissibilityReport, CoefficientPair, check_admissible
from transport_engine.errors import KernelDomainError
from transport_engine.geometry import Domain
from transport_engine.kernels.beta import beta_mass_function, beta_sup_estimate, default_p, require_exponent

logger = logging.getLogger(__name__)


def outgoing_measure(domain: Domain) -> float:
    """xi-measure of Gamma_+: |dX| times int_{nu.v > 0} nu.v dv."""
    hemisphere = 2.0 if domain.dimension == 2 else math.pi
    return domain.boundary_measure * hemisphere


def collision_series_tail(rate: float, order: int) -> float:
    """e^rate - sum_{n <= order} rate^n / n!, computed without cancellation."""
    if rate <= 0.0:
        return 0.0
    return math.exp(rate) * float(special.gammainc(order + 1, rate))


@dataclass(frozen=True)
class KernelBudget:
    """Norms and exponent behind the multiple-scattering constants."""

    dimension: int
    p: float
    beta_sup: float
    kappa_sup: float
    sigma_p_sup: float
    horizon: float
    outgoing_measure: float
    beta_mass_sup: Optional[float] = None

    def __post_init__(self):
        require_exponent(self.p, self.dimension)
        norms = (self.beta_sup, self.kappa_sup, self.sigma_p_sup, self.horizon, self.outgoing_measure)
        if not all(math.isfinite(value) and value >= 0.0 for value in norms):
            raise KernelDomainError(f"Budget norms must be finite and nonnegative, got {norms}")

    @property
    def conjugate_p(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def collision_rate(self) -> float:
        """T ||sigma_p||, the exponent of the growth bound."""
        return self.horizon * self.sigma_p_sup

    @property
    def _prefactor(self) -> float:
        return 2.0 ** (self.dimension - 2) * self.kappa_sup**2 * self.beta_sup ** (1.0 / self.p)

    @property
    def remainder(self) -> float:
        """C with ||multiple-scattering kernel||_{L^p} <= C per unit incoming mass."""
        return self._prefactor * self.horizon * math.exp(self.collision_rate)

    @property
    def two_collision(self) -> float:
        return self._prefactor * self.horizon

    @property
    def higher_collision(self) -> float:
        """Part of ``remainder`` carried by three or more collisions."""
        return self._prefactor * self.horizon * math.expm1(self.collision_rate)

    @property
    def double_mass(self) -> Optional[float]:
        """L^1 mass bound of the two-collision kernel, when the p = 1 beta is known."""
        if self.beta_mass_sup is None:
            return None
        return 2.0 ** (self.dimension - 2) * self.kappa_sup**2 * self.beta_mass_sup * self.horizon

    @property
    def holder_factor(self) -> float:
        """||1||_{L^{p'}((0, T) x Gamma_+)}."""
        return (self.horizon * self.outgoing_measure) ** (1.0 / self.conjugate_p)

    def series_tail(self, order: int) -> float:
        return collision_series_tail(self.collision_rate, order)

    def remainder_tail(self, order: int) -> float:
        if order <= 0:
            return math.inf
        constant = self.remainder if order == 1 else self.higher_collision
        return constant * self.holder_factor

    def tail_bound(self, order: int) -> float:
        """Mass bound of the collision orders above ``order``."""
        if order < 0:
            raise KernelDomainError(f"Collision order must be nonnegative, got {order}")
        return min(self.series_tail(order), self.remainder_tail(order))

    def growth_bound(self) -> float:
        """e^{T ||sigma_p||}: outgoing over incoming mass can never exceed it."""
        return math.exp(self.collision_rate)


def remainder_constant(
    domain: Domain,
    p: float,
    beta_sup: float,
    kappa_sup: float,
    sigma_p_sup: float,
    horizon: float,
    beta_mass_sup: Optional[float] = None,
) -> KernelBudget:
    budget = KernelBudget(
        dimension=domain.dimension,
        p=p,
        beta_sup=beta_sup,
        kappa_sup=kappa_sup,
        sigma_p_sup=sigma_p_sup,
        horizon=horizon,
        outgoing_measure=outgoing_measure(domain),
        beta_mass_sup=beta_mass_sup,
    )
    logger.debug(
        f"Remainder constant {budget.remainder:.6g} (two-collision {budget.two_collision:.6g}, "
        f"higher {budget.higher_collision:.6g})"
    )
    return budget


@lru_cache(maxsize=16)
def _beta_sups(
    domain: Domain,
    p: float,
    horizon: float,
    samples: int,
    radius: float,
    safety: float,
    boundary_nodes: int,
    angle_nodes: int,
    seed: int,
) -> tuple[float, float]:
    estimate = beta_sup_estimate(domain, p, horizon, samples, radius, safety, boundary_nodes, angle_nodes, seed=seed)
    masses = [beta_mass_function(domain, x, horizon, boundary_nodes, angle_nodes) for x in estimate.points]
    return estimate.safe, safety * max(masses)


def budget_for_pair(
    pair: CoefficientPair,
    domain: Domain,
    horizon: float,
    settings: Optional[KernelSettings] = None,
    admissibility: Optional[AdmissibilityReport] = None,
    seed: int = 0,
) -> KernelBudget:
    """Budget with sampled sup-norms of the pair and a sampled sup of beta."""
    settings = settings or KernelSettings()
    p = settings.p if settings.p is not None else default_p(domain.dimension)
    report = admissibility or check_admissible(pair, domain, safety=settings.sup_safety)
    if pair.kappa_vanishes:
        beta_sup, beta_mass = 0.0, 0.0
    else:
        beta_sup, beta_mass = _beta_sups(
            domain,
            p,
            horizon,
            settings.beta_samples,
            settings.beta_sample_radius,
            settings.beta_safety,
            settings.beta_boundary_nodes,
            settings.beta_angle_nodes,
            seed,
        )
    return remainder_constant(
        domain,
        p,
        beta_sup=beta_sup,
        kappa_sup=report.kappa_sup_safe,
        sigma_p_sup=report.sigma_p_sup_safe,
        horizon=horizon,
        beta_mass_sup=beta_mass,
    )
