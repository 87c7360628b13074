from typing import Any, Optional

from pydantic import BaseModel, Field

SCHEMA_VERSION = "1.0"


class Artifact(BaseModel):
    """Base artifact schema shared by every file the lab writes.

    Minimal contract: which schema wrote it and which configuration produced it.
    """

    schema_version: str = Field(default=SCHEMA_VERSION, description="Artifact schema version")
    config_hash: str = Field(default="", description="Stable hash of the producing configuration")
    kind: str = Field(description="Artifact family, e.g. response or sinogram")


class GridMetadata(BaseModel):
    """Discretization of (0, T) x Gamma_+ used by a response."""

    boundary_nodes: int
    angle_nodes: int
    time_bins: int
    horizon: float = Field(description="Observation horizon T")
    tangent_cutoff: float


class ResponseArtifact(Artifact):
    """Sidecar for a response CSV (t, boundary_index, angle_index, order, value, mass)."""

    kind: str = "response"
    grid: GridMetadata
    source_duration: float = Field(description="Source support length eta")
    order: int = Field(ge=0, description="Truncation order N")
    backend: str
    tail_bound: float = Field(ge=0.0, description="Certified mass bound of the orders not computed")
    incoming_mass: float
    growth_bound: Optional[float] = Field(
        default=None, gt=0.0, description="Certified bound on outgoing over incoming mass; None when unbounded"
    )
    phantom_hash: str = ""
    source: dict[str, Any] = Field(default_factory=dict, description="Source center and mollifier widths")


class SinogramArtifact(Artifact):
    """Sidecar for a sinogram CSV (angle_index, offset_index, angle, offset, value, flagged)."""

    kind: str = "sinogram"
    angles: int
    offsets: int
    mode: str
    flagged: int = Field(default=0, description="Number of samples flagged during extraction")
    phantom_hash: str = ""


class ReconstructionArtifact(Artifact):
    """Sidecar for a reconstruction CSV (row, column, x, y, value)."""

    kind: str = "reconstruction"
    size: int
    spacing: float
    window: str
    cutoff: float
    relative_l2_error: Optional[float] = None


class KappaSamplesArtifact(Artifact):
    """Sidecar for extracted scattering samples."""

    kind: str = "kappa-samples"
    entry: list[float]
    samples: int
    sigma_source: str = Field(description="Which sigma drove the attenuation division")


class SummaryArtifact(Artifact):
    """Sidecar for the summary table of one experiment run."""

    kind: str = "summary"
    experiment: str
