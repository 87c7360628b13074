"""Optical parameters: evaluable (sigma, k), line integrals, admissibility and the phantom catalog."""

from .admissibility import AdmissibilityReport, check_admissible
from .catalog import PhantomFactory, PhantomLibrary, load_phantom_file, perturbation_ladder
from .fields import CoefficientPair, KappaField, SigmaField, XRayField, sigma_p
from .lines import line_integral_sigma

__all__ = [
    "AdmissibilityReport",
    "CoefficientPair",
    "KappaField",
    "PhantomFactory",
    "PhantomLibrary",
    "SigmaField",
    "XRayField",
    "check_admissible",
    "line_integral_sigma",
    "load_phantom_file",
    "perturbation_ladder",
    "sigma_p",
]
