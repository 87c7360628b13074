"""Forward solver: the albedo operator through its truncated collision expansion."""

from .backend import ForwardBackend
from .closed_form import (
    Arrivals,
    ClosedFormBackend,
    ballistic_arrivals,
    depth_intervals,
    double_scatter_masses,
    single_scatter_arrivals,
)
from .io import load_response, save_response
from .operators import TimedPhaseField, apply_A2, apply_U1, kernel_matrix, lift_source, lifting_factors
from .picard import Lattice, PicardBackend
from .response import RESPONSE_COLUMNS, AlbedoResponse, MassCheck, deposit_arrivals, operator_mass_check
from .solver import ForwardSolver, SolverFactory, solve
from .source import BoundarySource, PhaseMollifier, SourceParticles, TemporalMollifier, bump

__all__ = [
    "RESPONSE_COLUMNS",
    "AlbedoResponse",
    "Arrivals",
    "BoundarySource",
    "ClosedFormBackend",
    "ForwardBackend",
    "ForwardSolver",
    "Lattice",
    "MassCheck",
    "PhaseMollifier",
    "PicardBackend",
    "SolverFactory",
    "SourceParticles",
    "TemporalMollifier",
    "TimedPhaseField",
    "apply_A2",
    "apply_U1",
    "ballistic_arrivals",
    "bump",
    "deposit_arrivals",
    "depth_intervals",
    "double_scatter_masses",
    "kernel_matrix",
    "lift_source",
    "lifting_factors",
    "load_response",
    "operator_mass_check",
    "save_response",
    "single_scatter_arrivals",
    "solve",
]
