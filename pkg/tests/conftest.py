import math
from typing import Callable

import pytest

from core.config import KernelSettings, QuadratureSettings
from core.models import PhantomSpec
from transport_engine.coefficients import CoefficientPair, PhantomFactory
from transport_engine.forward import ForwardSolver
from transport_engine.geometry import Domain, PhasePoint
from transport_engine.kernels import KernelBudget, outgoing_measure

HORIZON = 5.0


@pytest.fixture
def horizon() -> float:
    return HORIZON


@pytest.fixture
def disk() -> Domain:
    return Domain.unit_disk()


@pytest.fixture
def ball() -> Domain:
    return Domain.unit_ball()


@pytest.fixture
def coarse_quadrature() -> QuadratureSettings:
    return QuadratureSettings(boundary_nodes=16, angle_nodes=16, time_bins=20)


@pytest.fixture
def light_kernels() -> KernelSettings:
    return KernelSettings(beta_samples=4, beta_boundary_nodes=64, beta_angle_nodes=8, double_depth_nodes=4)


@pytest.fixture
def west_entry() -> PhasePoint:
    """Enters the unit disk at (-1, 0) heading along +x."""
    return PhasePoint.planar([-1.0, 0.0], 0.0)


@pytest.fixture
def catalog_pair() -> Callable[[str], CoefficientPair]:
    def build(name: str) -> CoefficientPair:
        return CoefficientPair.from_spec(PhantomFactory.get_phantom(name))

    return build


@pytest.fixture
def absorber(catalog_pair) -> CoefficientPair:
    return catalog_pair("absorber")


@pytest.fixture
def constant(catalog_pair) -> CoefficientPair:
    return catalog_pair("constant")


@pytest.fixture
def vacuum(catalog_pair) -> CoefficientPair:
    return catalog_pair("vacuum")


@pytest.fixture
def gaussian_spec() -> PhantomSpec:
    return PhantomFactory.get_phantom("gaussian")


@pytest.fixture
def small_budget() -> Callable[..., KernelBudget]:
    """Budgets with hand-picked norms, so tests never sample beta."""

    def build(domain: Domain, kappa: float = 0.0, horizon: float = HORIZON) -> KernelBudget:
        return KernelBudget(
            dimension=domain.dimension,
            p=1.2 if domain.dimension == 2 else 1.15,
            beta_sup=10.0 if kappa > 0.0 else 0.0,
            kappa_sup=kappa,
            sigma_p_sup=2.0 * math.pi * kappa,
            horizon=horizon,
            outgoing_measure=outgoing_measure(domain),
            beta_mass_sup=5.0 if kappa > 0.0 else 0.0,
        )

    return build


@pytest.fixture
def coarse_solver(coarse_quadrature, light_kernels, small_budget) -> Callable[..., ForwardSolver]:
    def build(pair: CoefficientPair, domain: Domain, kappa: float = 0.0, horizon: float = HORIZON) -> ForwardSolver:
        return ForwardSolver(
            pair,
            domain,
            quadrature=coarse_quadrature,
            kernels=light_kernels,
            budget=small_budget(domain, kappa, horizon),
        )

    return build
