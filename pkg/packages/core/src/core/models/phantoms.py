"""Declarative phantom definitions.

Phantoms are described by parameters only; the numerical fields are built
from these descriptions by the engine. Keeping them as pydantic models gives
- bit-exact JSON/TOML round-trips of every parameter
- discriminated unions for the sigma and kappa families
- a single place for the class membership metadata (M, r_tilde)
"""

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator


class ConstantSigma(BaseModel):
    """sigma(x) = value inside X."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["constant"] = "constant"
    value: float = Field(default=0.0, ge=0.0, description="Constant extinction level")


class GaussianBump(BaseModel):
    """One isotropic Gaussian bump amplitude * exp(-|x - c|^2 / (2 w^2))."""

    model_config = ConfigDict(frozen=True)

    amplitude: float = Field(ge=0.0, description="Peak value of the bump")
    center: tuple[float, ...] = Field(description="Bump center, one coordinate per dimension")
    width: float = Field(gt=0.0, description="Standard deviation of the bump")


class GaussianSigma(BaseModel):
    """sigma(x) = background + sum of Gaussian bumps."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["gaussian"] = "gaussian"
    background: float = Field(default=0.0, ge=0.0, description="Constant level added to the bumps")
    bumps: tuple[GaussianBump, ...] = Field(default=(), description="Gaussian components")

    def scaled(self, factor: float) -> "GaussianSigma":
        """Copy with every bump amplitude multiplied by ``factor``."""
        bumps = tuple(bump.model_copy(update={"amplitude": bump.amplitude * factor}) for bump in self.bumps)
        return self.model_copy(update={"bumps": bumps})


SigmaSpec = Annotated[Union[ConstantSigma, GaussianSigma], Field(discriminator="kind")]


class IsotropicKappa(BaseModel):
    """k(x, v', v) = value."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["isotropic"] = "isotropic"
    value: float = Field(default=0.0, ge=0.0, description="Constant scattering density")


class HenyeyGreensteinKappa(BaseModel):
    """k(x, v', v) = scale * (1 - g^2) / (1 + g^2 - 2 g v.v')."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["henyey-greenstein"] = "henyey-greenstein"
    scale: float = Field(default=0.0, ge=0.0, description="Overall scattering strength")
    asymmetry: float = Field(default=0.5, gt=-1.0, lt=1.0, description="Anisotropy parameter g")


class LinearKappa(BaseModel):
    """k(x, v', v) = isotropic + linear * v.v'; negative somewhere when |linear| > isotropic."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["linear"] = "linear"
    isotropic: float = Field(default=0.0, description="Direction-independent part")
    linear: float = Field(default=0.0, description="Coefficient of the cosine between v and v'")


KappaSpec = Annotated[Union[IsotropicKappa, HenyeyGreensteinKappa, LinearKappa], Field(discriminator="kind")]


class MembershipSpec(BaseModel):
    """Smoothness class parameters: ||sigma||_{H^{d/2 + r_tilde}} <= M and ||sigma_p|| <= M."""

    model_config = ConfigDict(frozen=True)

    bound: float = Field(gt=0.0, description="The class bound M")
    smoothness: float = Field(gt=0.0, description="Extra Sobolev smoothness r_tilde")


class PhantomSpec(BaseModel):
    """A named analytic phantom."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(description="Catalog name")
    description: str = Field(default="", description="Human readable summary")
    dimension: int = Field(default=2, ge=2, le=3, description="Spatial dimension d")
    sigma: SigmaSpec = Field(default_factory=ConstantSigma, description="Extinction field")
    kappa: KappaSpec = Field(default_factory=IsotropicKappa, description="Scattering kernel")
    membership: Optional[MembershipSpec] = Field(default=None, description="Class membership metadata")

    @field_validator("sigma")
    @classmethod
    def bumps_match_dimension(cls, v, info):
        dimension = info.data.get("dimension", 2)
        if isinstance(v, GaussianSigma):
            for bump in v.bumps:
                if len(bump.center) != dimension:
                    raise ValueError(f"Bump center {bump.center} does not have {dimension} coordinates")
        return v

    def with_sigma_scale(self, factor: float, name: Optional[str] = None) -> "PhantomSpec":
        """Multiply the Gaussian bump amplitudes (or the constant level) by ``factor``."""
        if isinstance(self.sigma, GaussianSigma):
            sigma = self.sigma.scaled(factor)
        else:
            sigma = self.sigma.model_copy(update={"value": self.sigma.value * factor})
        return self.model_copy(update={"sigma": sigma, "name": name or f"{self.name}*{factor:g}"})


class PhantomPairSpec(BaseModel):
    """A reference phantom and its perturbation, compared by the stability checks."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(description="Catalog name of the pair")
    description: str = Field(default="")
    reference: PhantomSpec
    perturbed: PhantomSpec

    @field_validator("perturbed")
    @classmethod
    def same_dimension(cls, v, info):
        reference = info.data.get("reference")
        if reference is not None and reference.dimension != v.dimension:
            raise ValueError("Both phantoms of a pair must share the spatial dimension")
        return v
