"""Inversion: sigma from gated ballistic arrivals and filtered back-projection, k from single-scatter arrivals."""

from .ballistic import (
    BallisticExtraction,
    RichardsonEstimate,
    ballistic_ladder,
    exit_cells,
    extract_ballistic,
    gate_bins,
    richardson_limit,
)
from .fbp import (
    RECONSTRUCTION_COLUMNS,
    ReconstructionGrid,
    back_project,
    filter_projections,
    ram_lak_kernel,
    ramp_filter,
    reconstruct_from_settings,
    reconstruct_sigma,
)
from .scattering import (
    KAPPA_COLUMNS,
    KappaSample,
    KappaSamples,
    broken_ray_depths,
    extract_k,
    extract_k_from_settings,
)
from .xray import (
    SINOGRAM_COLUMNS,
    ParallelBeamGeometry,
    Sinogram,
    XRaySample,
    analytic_line_integrals,
    scan_from_settings,
    xray_transform_scan,
)

__all__ = [
    "KAPPA_COLUMNS",
    "RECONSTRUCTION_COLUMNS",
    "SINOGRAM_COLUMNS",
    "BallisticExtraction",
    "KappaSample",
    "KappaSamples",
    "ParallelBeamGeometry",
    "ReconstructionGrid",
    "RichardsonEstimate",
    "Sinogram",
    "XRaySample",
    "analytic_line_integrals",
    "back_project",
    "ballistic_ladder",
    "broken_ray_depths",
    "exit_cells",
    "extract_ballistic",
    "extract_k",
    "extract_k_from_settings",
    "filter_projections",
    "gate_bins",
    "ram_lak_kernel",
    "ramp_filter",
    "reconstruct_from_settings",
    "reconstruct_sigma",
    "richardson_limit",
    "scan_from_settings",
    "xray_transform_scan",
]
