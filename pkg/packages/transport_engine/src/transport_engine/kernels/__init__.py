"""Closed-form albedo kernels and the constants bounding the multiple-scattering remainder."""

from .attenuation import attenuation_E, broken_ray_attenuation
from .ballistic import BallisticArrival, ballistic_kernel, require_boundary
from .beta import (
    BetaEstimate,
    beta_function,
    beta_mass_function,
    beta_sup_estimate,
    beta_upper_bound,
    default_p,
    interior_halton_points,
    require_exponent,
)
from .budget import KernelBudget, budget_for_pair, collision_series_tail, outgoing_measure, remainder_constant
from .double import DoubleScatterEvaluation, double_scatter_kernel, double_scatter_values
from .single import SingleScatterSample, single_scatter_density

__all__ = [
    "BallisticArrival",
    "BetaEstimate",
    "DoubleScatterEvaluation",
    "KernelBudget",
    "SingleScatterSample",
    "attenuation_E",
    "ballistic_kernel",
    "beta_function",
    "beta_mass_function",
    "beta_sup_estimate",
    "beta_upper_bound",
    "broken_ray_attenuation",
    "budget_for_pair",
    "collision_series_tail",
    "default_p",
    "double_scatter_kernel",
    "double_scatter_values",
    "interior_halton_points",
    "outgoing_measure",
    "remainder_constant",
    "require_boundary",
    "require_exponent",
    "single_scatter_density",
]
