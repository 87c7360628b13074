"""Core model definitions."""

from .artifacts import (
    SCHEMA_VERSION,
    Artifact,
    GridMetadata,
    KappaSamplesArtifact,
    ReconstructionArtifact,
    ResponseArtifact,
    SinogramArtifact,
    SummaryArtifact,
)
from .phantoms import (
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
from .reports import OperatorDistance, ProbeRecord, StabilityReport, StabilityRow

__all__ = [
    "SCHEMA_VERSION",
    "Artifact",
    "GridMetadata",
    "KappaSamplesArtifact",
    "ReconstructionArtifact",
    "ResponseArtifact",
    "SinogramArtifact",
    "SummaryArtifact",
    "ConstantSigma",
    "GaussianBump",
    "GaussianSigma",
    "HenyeyGreensteinKappa",
    "IsotropicKappa",
    "LinearKappa",
    "MembershipSpec",
    "PhantomPairSpec",
    "PhantomSpec",
    "OperatorDistance",
    "ProbeRecord",
    "StabilityReport",
    "StabilityRow",
]
