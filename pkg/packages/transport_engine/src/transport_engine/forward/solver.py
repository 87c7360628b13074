import logging
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from core.config import ExperimentConfig, KernelSettings, QuadratureSettings, SolverSettings
from core.types import SolverBackend
from transport_engine.coefficients import CoefficientPair
from transport_engine.errors import GridMismatchError
from transport_engine.forward.backend import ForwardBackend
from transport_engine.forward.closed_form import ClosedFormBackend
from transport_engine.forward.picard import PicardBackend
from transport_engine.forward.response import AlbedoResponse
from transport_engine.forward.source import BoundarySource
from transport_engine.geometry import BoundaryGrid, Domain
from transport_engine.kernels import KernelBudget, budget_for_pair

logger = logging.getLogger(__name__)


class SolverFactory:
    """Pure static factory for forward backends."""

    _backend_map: dict[SolverBackend, type[ForwardBackend]] = {
        SolverBackend.CLOSED_FORM: ClosedFormBackend,
        SolverBackend.PICARD: PicardBackend,
    }

    @staticmethod
    def get_backend(backend: SolverBackend | str, pair: CoefficientPair, domain: Domain, **kwargs) -> ForwardBackend:
        backend = SolverBackend(backend)
        if backend not in SolverFactory._backend_map:
            raise ValueError(
                f"Invalid backend: {backend}, valid backends are: {list(SolverFactory._backend_map.keys())}"
            )
        return SolverFactory._backend_map[backend](pair, domain, **kwargs)


class ForwardSolver:
    """Albedo operator of one coefficient pair, truncated at a collision order.

    Example:
        ```python
        solver = ForwardSolver(pair, Domain.unit_disk())
        source = BoundarySource.mollified(domain, center, 0.1, 0.1, duration=0.25)
        response = solver.solve(source, horizon=5.0, order=2)
        ```
    """

    def __init__(
        self,
        pair: CoefficientPair,
        domain: Domain,
        quadrature: Optional[QuadratureSettings] = None,
        kernels: Optional[KernelSettings] = None,
        solver: Optional[SolverSettings] = None,
        threads: Optional[int] = None,
        budget: Optional[KernelBudget] = None,
        seed: int = 0,
    ):
        self.pair = pair
        self.domain = domain
        self.quadrature = quadrature or QuadratureSettings()
        self.kernels = kernels or KernelSettings()
        self.settings = solver or SolverSettings()
        self.threads = threads
        self.seed = seed
        self._budget = budget

    @classmethod
    def from_config(
        cls, pair: CoefficientPair, domain: Domain, config: ExperimentConfig, budget: Optional[KernelBudget] = None
    ) -> "ForwardSolver":
        return cls(
            pair,
            domain,
            quadrature=config.quadrature,
            kernels=config.kernels,
            solver=config.solver,
            threads=config.resolved_threads,
            budget=budget,
            seed=config.seed,
        )

    def budget(self, horizon: float) -> KernelBudget:
        """Kernel budget at this horizon; a budget passed in at construction must match it."""
        if self._budget is not None:
            if abs(self._budget.horizon - horizon) > 1e-12:
                raise GridMismatchError(f"Budget horizon {self._budget.horizon} does not match T = {horizon}")
            return self._budget
        self._budget = budget_for_pair(self.pair, self.domain, horizon, self.kernels, seed=self.seed)
        return self._budget

    def grid(self, horizon: float) -> BoundaryGrid:
        return BoundaryGrid.from_settings(self.domain, self.quadrature, horizon)

    def solve(
        self,
        source: BoundarySource,
        horizon: float,
        order: Optional[int] = None,
        backend: Optional[SolverBackend | str] = None,
        grid: Optional[BoundaryGrid] = None,
        window: Optional[NDArray[np.bool_]] = None,
    ) -> AlbedoResponse:
        """Outgoing response of ``source`` on (0, T) x Gamma_+ up to collision order N."""
        order = self.settings.order if order is None else order
        engine = SolverFactory.get_backend(
            backend or self.settings.backend,
            self.pair,
            self.domain,
            quadrature=self.quadrature,
            kernels=self.kernels,
            solver=self.settings,
            threads=self.threads,
        )
        engine.check_order(order)
        if horizon <= source.duration:
            logger.warning(f"T = {horizon:g} does not exceed the source duration eta = {source.duration:g}")
        grid = grid or self.grid(horizon)
        if abs(grid.horizon - horizon) > 1e-12:
            raise GridMismatchError(f"Grid horizon {grid.horizon} does not match T = {horizon}")
        if window is not None and window.shape != grid.shape[1:]:
            raise GridMismatchError(f"Window shape {window.shape} does not match grid {grid.shape[1:]}")

        budget = self.budget(horizon)
        masses = engine.compute(source, grid, order, window)
        response = AlbedoResponse(
            grid=grid,
            masses=masses,
            source_duration=source.duration,
            order=order,
            tail_bound=engine.tail_bound(budget, order),
            incoming_mass=source.incoming_mass,
            backend=engine.backend,
            growth_bound=budget.growth_bound(),
            window=window,
            source=source.describe(),
        )
        logger.info(
            f"Solved {self.pair.name or 'pair'} with {engine.backend.value} backend to N = {order}: "
            f"outgoing mass {response.mass():.6g}, tail bound {response.tail_bound:.3g}"
        )
        return response


def solve(
    pair: CoefficientPair,
    domain: Domain,
    source: BoundarySource,
    horizon: float,
    order: int = 2,
    backend: SolverBackend | str = SolverBackend.CLOSED_FORM,
    grid: Optional[BoundaryGrid] = None,
    window: Optional[NDArray[np.bool_]] = None,
    budget: Optional[KernelBudget] = None,
    config: Optional[ExperimentConfig] = None,
) -> AlbedoResponse:
    """One-shot forward solve with settings from ``config`` (or the defaults)."""
    if config is not None:
        solver = ForwardSolver.from_config(pair, domain, config, budget=budget)
    else:
        solver = ForwardSolver(pair, domain, budget=budget)
    return solver.solve(source, horizon, order=order, backend=backend, grid=grid, window=window)
