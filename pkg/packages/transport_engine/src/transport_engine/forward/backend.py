from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from core.config import KernelSettings, QuadratureSettings, SolverSettings
from core.types import SolverBackend
from transport_engine.coefficients import CoefficientPair
from transport_engine.forward.source import BoundarySource
from transport_engine.geometry import BoundaryGrid, Domain, LineQuadrature
from transport_engine.kernels import KernelBudget


class ForwardBackend(ABC):
    """Computes the outgoing masses of the first collision orders for one source."""

    backend: SolverBackend

    def __init__(
        self,
        pair: CoefficientPair,
        domain: Domain,
        quadrature: Optional[QuadratureSettings] = None,
        kernels: Optional[KernelSettings] = None,
        solver: Optional[SolverSettings] = None,
        threads: Optional[int] = None,
    ):
        self.pair = pair
        self.domain = domain
        self.quadrature = quadrature or QuadratureSettings()
        self.kernels = kernels or KernelSettings()
        self.solver = solver or SolverSettings()
        self.threads = threads
        self.line = LineQuadrature.for_length(
            domain.diameter, self.quadrature.ray_nodes, self.quadrature.ray_panel_length
        )

    @abstractmethod
    def check_order(self, order: int) -> None:
        """Raise ValueError when the backend cannot produce the requested truncation order."""
        pass

    @abstractmethod
    def compute(
        self,
        source: BoundarySource,
        grid: BoundaryGrid,
        order: int,
        window: Optional[NDArray[np.bool_]] = None,
    ) -> dict[int, NDArray[np.float64]]:
        """Cell masses per explicit collision order."""
        pass

    @abstractmethod
    def tail_bound(self, budget: KernelBudget, order: int) -> float:
        """Mass bound per unit incoming mass of everything ``compute`` leaves out."""
        pass
