"""Phantom catalog and phantom files.

Example:
    ```python
    spec = PhantomFactory.get_phantom("gaussian")
    pair = CoefficientPair.from_spec(spec)
    ladder = perturbation_ladder(PhantomFactory.get_pair("gaussian-bump"), (0.2, 0.1))
    ```
"""

import logging
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

from core.config import read_config_file
from core.errors import ConfigValidationError
from core.models import (
    ConstantSigma,
    GaussianBump,
    GaussianSigma,
    HenyeyGreensteinKappa,
    IsotropicKappa,
    LinearKappa,
    MembershipSpec,
    PhantomPairSpec,
    PhantomSpec,
)

logger = logging.getLogger(__name__)

_GAUSSIAN = GaussianSigma(background=0.0, bumps=(GaussianBump(amplitude=1.0, center=(0.1, -0.05), width=0.2),))
_TWO_GAUSSIANS = GaussianSigma(
    background=0.1,
    bumps=(
        GaussianBump(amplitude=0.6, center=(-0.3, 0.2), width=0.15),
        GaussianBump(amplitude=0.8, center=(0.35, -0.25), width=0.25),
    ),
)
_SMOOTH = MembershipSpec(bound=20.0, smoothness=1.0)


class PhantomLibrary(BaseModel):
    """Extra phantoms and pairs loaded from a TOML or JSON file."""

    phantoms: list[PhantomSpec] = Field(default_factory=list)
    pairs: list[PhantomPairSpec] = Field(default_factory=list)


class PhantomFactory:
    """Pure static factory for catalog phantoms and phantom pairs."""

    _phantom_map: dict[str, PhantomSpec] = {
        spec.name: spec
        for spec in (
            PhantomSpec(name="vacuum", description="sigma = 0, k = 0"),
            PhantomSpec(name="absorber", description="sigma = 0.5, k = 0", sigma=ConstantSigma(value=0.5)),
            PhantomSpec(
                name="constant",
                description="sigma = 0.5, isotropic k = 0.05",
                sigma=ConstantSigma(value=0.5),
                kappa=IsotropicKappa(value=0.05),
                membership=MembershipSpec(bound=2.0, smoothness=1.0),
            ),
            PhantomSpec(
                name="gaussian",
                description="one Gaussian bump, isotropic k = 0.05",
                sigma=_GAUSSIAN,
                kappa=IsotropicKappa(value=0.05),
                membership=_SMOOTH,
            ),
            PhantomSpec(
                name="gaussian-absorber",
                description="one Gaussian bump, k = 0",
                sigma=_GAUSSIAN,
                membership=_SMOOTH,
            ),
            PhantomSpec(
                name="two-gaussians",
                description="two Gaussian bumps on a 0.1 background, isotropic k = 0.05",
                sigma=_TWO_GAUSSIANS,
                kappa=IsotropicKappa(value=0.05),
                membership=_SMOOTH,
            ),
            PhantomSpec(
                name="hg",
                description="sigma = 0.5, Henyey-Greenstein k with g = 0.5",
                sigma=ConstantSigma(value=0.5),
                kappa=HenyeyGreensteinKappa(scale=0.01, asymmetry=0.5),
            ),
            PhantomSpec(
                name="lobed",
                description="sigma = 0.5, linear k with a negative lobe (not admissible)",
                sigma=ConstantSigma(value=0.5),
                kappa=LinearKappa(isotropic=0.02, linear=0.05),
            ),
        )
    }

    _pair_specs: dict[str, tuple[str, str, Optional[dict]]] = {
        "identical": ("constant", "constant", None),
        "const-bump": ("absorber", "absorber", {"sigma": ConstantSigma(value=0.6)}),
        "const-bump-half": ("absorber", "absorber", {"sigma": ConstantSigma(value=0.55)}),
        "k-shift": ("constant", "constant", {"kappa": IsotropicKappa(value=0.06)}),
        "gaussian-bump": ("gaussian", "gaussian", {"sigma": _GAUSSIAN.scaled(1.2)}),
        "gaussian-absorber-bump": ("gaussian-absorber", "gaussian-absorber", {"sigma": _GAUSSIAN.scaled(1.2)}),
    }

    @staticmethod
    def phantom_names() -> list[str]:
        return sorted(PhantomFactory._phantom_map)

    @staticmethod
    def pair_names() -> list[str]:
        return sorted(PhantomFactory._pair_specs)

    @staticmethod
    def get_phantom(name: str, library: Optional[PhantomLibrary] = None) -> PhantomSpec:
        if library is not None:
            for spec in library.phantoms:
                if spec.name == name:
                    return spec
        if name not in PhantomFactory._phantom_map:
            raise ValueError(f"Invalid phantom: {name}, valid phantoms are: {PhantomFactory.phantom_names()}")
        return PhantomFactory._phantom_map[name]

    @staticmethod
    def get_pair(name: str, library: Optional[PhantomLibrary] = None) -> PhantomPairSpec:
        if library is not None:
            for pair in library.pairs:
                if pair.name == name:
                    return pair
        if name not in PhantomFactory._pair_specs:
            raise ValueError(f"Invalid phantom pair: {name}, valid pairs are: {PhantomFactory.pair_names()}")
        reference_name, perturbed_name, update = PhantomFactory._pair_specs[name]
        reference = PhantomFactory._phantom_map[reference_name]
        perturbed = PhantomFactory._phantom_map[perturbed_name]
        if update:
            perturbed = perturbed.model_copy(update={**update, "name": f"{perturbed_name}~"})
        return PhantomPairSpec(name=name, reference=reference, perturbed=perturbed)


def load_phantom_file(path: Path) -> PhantomLibrary:
    """Read extra phantom definitions; parameters round-trip bit-exactly through JSON."""
    data = read_config_file(path)
    try:
        library = PhantomLibrary.model_validate(data)
    except ValidationError as e:
        messages = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigValidationError(messages) from e
    logger.info(f"Loaded {len(library.phantoms)} phantoms and {len(library.pairs)} pairs from {path}")
    return library


def perturbation_ladder(pair: PhantomPairSpec, deltas: Sequence[float]) -> list[PhantomPairSpec]:
    """Pairs (reference, reference with sigma scaled by 1 + delta), one per rung."""
    return [
        PhantomPairSpec(
            name=f"{pair.name}@{delta:g}",
            reference=pair.reference,
            perturbed=pair.reference.with_sigma_scale(1.0 + delta),
        )
        for delta in deltas
    ]
