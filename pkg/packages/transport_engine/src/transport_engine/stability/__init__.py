"""Stability checks: operator distance estimates and the rows of the pointwise, Sobolev and tail estimates."""

from .distance import (
    EntryDifference,
    albedo_distance,
    ballistic_weights,
    double_scatter_difference,
    entry_kernel_difference,
    entry_nodes,
    single_scatter_difference,
)
from .pointwise import (
    ChordRule,
    attenuation_sup_difference,
    change_of_variables_row,
    check_attenuation_stability,
    check_scattering_stability,
    chord_integrals,
    global_kernel_difference,
    kernel_difference_l1,
    scattering_sup,
)
from .smoothness import LadderRung, check_sobolev_stability, class_membership, run_perturbation_ladder, scaling_rows
from .sobolev import (
    SobolevGrid,
    embedding_constant,
    interpolation_check,
    interpolation_exponents,
    kernel_stability_exponent,
    sigma_stability_exponent,
    sobolev_norm,
    wavenumbers,
)
from .tail import cell_measures, check_multiple_scattering_tail, pairing_ratio, shrinking_supports, support_norm

__all__ = [
    "ChordRule",
    "EntryDifference",
    "LadderRung",
    "SobolevGrid",
    "albedo_distance",
    "attenuation_sup_difference",
    "ballistic_weights",
    "cell_measures",
    "change_of_variables_row",
    "check_attenuation_stability",
    "check_multiple_scattering_tail",
    "check_scattering_stability",
    "check_sobolev_stability",
    "chord_integrals",
    "class_membership",
    "double_scatter_difference",
    "embedding_constant",
    "entry_kernel_difference",
    "entry_nodes",
    "global_kernel_difference",
    "interpolation_check",
    "interpolation_exponents",
    "kernel_difference_l1",
    "kernel_stability_exponent",
    "pairing_ratio",
    "run_perturbation_ladder",
    "scaling_rows",
    "scattering_sup",
    "shrinking_supports",
    "sigma_stability_exponent",
    "single_scatter_difference",
    "sobolev_norm",
    "support_norm",
    "wavenumbers",
]
