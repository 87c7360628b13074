"""Experiment settings and configuration loading.

Settings are layered the same way for every entry point:
- environment variables prefixed ``TRANSPORT_`` (nested keys joined by ``__``)
- the ``.env`` file
- the declarative TOML config file
- field defaults
"""

import json
import os

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from core.errors import ConfigValidationError
from core.types import DomainKind, ExperimentKind, FilterWindow, SolverBackend, XRayMode
from core.utils.hashing import stable_hash

MIN_BOUNDARY_NODES = 16
MIN_ANGLE_NODES = 16
MIN_TIME_BINS = 20
MIN_RECONSTRUCTION_ANGLES = 32
# kernel integrability exponent p per dimension d when none is configured
DEFAULT_EXPONENTS = {2: 1.2, 3: 1.15}


class DomainSettings(BaseModel):
    """Convex domain X."""

    kind: DomainKind = Field(default=DomainKind.UNIT_DISK, description="Domain family")
    semi_axes: Optional[tuple[float, ...]] = Field(
        default=None, description="Semi-axes for an ellipse; ignored for the unit disk and ball"
    )

    @property
    def dimension(self) -> int:
        if self.kind is DomainKind.UNIT_BALL:
            return 3
        return 2

    @property
    def diameter(self) -> float:
        if self.kind is DomainKind.ELLIPSE and self.semi_axes:
            return 2.0 * max(self.semi_axes)
        return 2.0

    @model_validator(mode="after")
    def ellipse_needs_axes(self):
        if self.kind is DomainKind.ELLIPSE:
            if not self.semi_axes or len(self.semi_axes) != 2 or min(self.semi_axes) <= 0:
                raise ValueError("An ellipse needs two positive semi_axes")
        return self


class SceneSettings(BaseModel):
    """Observation window and source parameters."""

    domain: DomainSettings = Field(default_factory=DomainSettings)
    horizon: float = Field(default=5.0, gt=0.0, description="Observation horizon T")
    source_duration: float = Field(default=0.25, gt=0.0, description="Source support length eta")
    mollifier_ladder: tuple[float, ...] = Field(
        default=(0.2, 0.1, 0.05), description="Mollifier widths eps1 = eps2, coarse to fine"
    )
    point_source: bool = Field(default=False, description="Use a phase-space delta (eps1 = 0) as the source")

    @field_validator("mollifier_ladder")
    @classmethod
    def ladder_is_positive(cls, v):
        if not v or any(eps <= 0 for eps in v):
            raise ValueError("mollifier_ladder must contain positive widths")
        return tuple(sorted(v, reverse=True))


class QuadratureSettings(BaseModel):
    """Resolutions of the boundary grid and of the ray quadratures."""

    boundary_nodes: int = Field(default=64, ge=MIN_BOUNDARY_NODES, description="Nodes on the boundary")
    angle_nodes: int = Field(default=128, ge=MIN_ANGLE_NODES, description="Nodes on S^{d-1}")
    time_bins: int = Field(default=100, ge=MIN_TIME_BINS, description="Bins on (0, T)")
    ray_nodes: int = Field(default=8, ge=2, le=64, description="Gauss-Legendre nodes per ray panel")
    ray_panel_length: float = Field(default=0.5, gt=0.0, description="Maximum panel length along rays")
    depth_nodes: int = Field(default=3, ge=1, le=16, description="Gauss nodes per scattering-depth interval")
    source_nodes: int = Field(default=6, ge=1, le=32, description="Nodes per axis of a mollified source")
    tangent_cutoff: float = Field(default=1e-6, gt=0.0, lt=1e-2, description="Near-tangent exclusion")


class KernelSettings(BaseModel):
    """Double-scattering kernel and beta-function quadrature."""

    p: Optional[float] = Field(default=None, description="Integrability exponent; default per dimension")
    singular_tube: float = Field(default=1e-4, ge=0.0, description="Exclusion tube around the singular set")
    double_depth_nodes: int = Field(default=8, ge=2, description="First-collision depth nodes")
    beta_boundary_nodes: int = Field(default=512, ge=32)
    beta_angle_nodes: int = Field(default=32, ge=4, description="Gauss-Jacobi nodes per angular side")
    beta_samples: int = Field(default=64, ge=4, description="Halton points for the sup estimate")
    beta_sample_radius: float = Field(default=0.9, gt=0.0, lt=1.0)
    beta_safety: float = Field(default=1.1, ge=1.0)
    sup_safety: float = Field(default=1.05, ge=1.0, description="Safety factor on sampled sup-norms")


class SolverSettings(BaseModel):
    """Forward solver backend and truncation order."""

    backend: SolverBackend = Field(default=SolverBackend.CLOSED_FORM)
    order: int = Field(default=2, ge=0, description="Truncation order N")
    lattice_nodes: int = Field(default=32, ge=8, description="Spatial lattice nodes per axis (Picard)")
    lattice_time_steps: int = Field(default=80, ge=8, description="Lattice time steps on (0, T) (Picard)")
    mass_slack: float = Field(default=1e-6, ge=0.0, description="Relative slack of the mass check")


class InversionSettings(BaseModel):
    """X-ray scan, filtered back-projection and extraction gates."""

    mode: XRayMode = Field(default=XRayMode.ANALYTIC)
    n_angles: int = Field(default=128, ge=1)
    n_offsets: int = Field(default=129, ge=3)
    grid_size: int = Field(default=128, ge=8)
    window: FilterWindow = Field(default=FilterWindow.HANN)
    cutoff: float = Field(default=0.9, gt=0.0, le=1.0, description="Window cutoff as a fraction of Nyquist")
    cone_half_width: float = Field(default=0.1, gt=0.0, lt=1.0, description="Ballistic exclusion cone")
    gate_cells: int = Field(default=1, ge=0, description="Extra time cells added to gates")
    min_attenuation: float = Field(default=1e-8, gt=0.0)


class StabilitySettings(BaseModel):
    """Entry sets, probes and Sobolev parameters for the stability checks."""

    entry_count: int = Field(default=100, ge=1)
    probe_count: int = Field(default=8, ge=0)
    probe_epsilon: float = Field(default=0.05, gt=0.0)
    perturbation_ladder: tuple[float, ...] = Field(default=(0.2, 0.1, 0.05, 0.025))
    sobolev_order: float = Field(default=-0.5, description="s in the H^s estimate")
    kernel_order: float = Field(default=0.0, description="r in the L1 kernel estimates")
    sobolev_grid: int = Field(default=128, ge=16, description="Grid nodes per axis for Sobolev norms")
    embedding_safety: float = Field(default=1.5, ge=1.0)
    row_tolerance: float = Field(default=1e-8, ge=0.0)
    probe_tolerance: float = Field(default=0.05, ge=0.0, description="Mollifier tolerance of probe rows")
    psi_rungs: int = Field(default=5, ge=1)


class ExperimentConfig(BaseSettings):
    """Complete configuration of one experiment run."""

    model_config = SettingsConfigDict(
        env_prefix="TRANSPORT_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
        env_file=".env",
        env_file_encoding="utf-8",
    )

    experiment: ExperimentKind = Field(default=ExperimentKind.FORWARD)
    phantom: str = Field(default="constant", description="Catalog phantom name")
    pair: Optional[str] = Field(default=None, description="Catalog phantom pair name")
    phantom_file: Optional[Path] = Field(default=None, description="Extra phantom definitions (TOML or JSON)")
    scene: SceneSettings = Field(default_factory=SceneSettings)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    kernels: KernelSettings = Field(default_factory=KernelSettings)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    inversion: InversionSettings = Field(default_factory=InversionSettings)
    stability: StabilitySettings = Field(default_factory=StabilitySettings)
    output_dir: Path = Field(default=Path("artifacts"))
    threads: Optional[int] = Field(default=None, ge=1, description="Worker threads; default = available cores")
    seed: int = Field(default=0, ge=0, le=2**64 - 1, description="Seed for probe sampling")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # environment overrides the file contents passed in as init kwargs; flags go on top in _FlagLayer
        return env_settings, dotenv_settings, init_settings, file_secret_settings

    @property
    def kernel_exponent(self) -> float:
        if self.kernels.p is not None:
            return self.kernels.p
        return DEFAULT_EXPONENTS[self.scene.domain.dimension]

    @property
    def resolved_threads(self) -> int:
        return self.threads or os.cpu_count() or 1

    def hypothesis_errors(self) -> list[str]:
        """Cross-field requirements, all of them, as human readable messages."""
        errors: list[str] = []
        diameter = self.scene.domain.diameter
        horizon = self.scene.horizon
        if horizon <= diameter:
            errors.append(f"scene.horizon: T = {horizon:g} must satisfy T > diam(X) = {diameter:g}")
        elif self.experiment.needs_double_horizon and horizon <= 2.0 * diameter:
            errors.append(
                f"scene.horizon: T = {horizon:g} must satisfy T > 2 diam(X) = {2.0 * diameter:g} "
                f"for the {self.experiment.value} experiment"
            )
        if horizon <= self.scene.source_duration:
            errors.append(f"scene.source_duration: eta = {self.scene.source_duration:g} must be smaller than T")
        p = self.kernel_exponent
        d = self.scene.domain.dimension
        if not 1.0 < p < (d + 1) / d:
            errors.append(f"kernels.p: p = {p:g} must lie in the open interval (1, {(d + 1) / d:g})")
        if self.experiment is ExperimentKind.BALLISTIC_SIGMA and self.inversion.n_angles < MIN_RECONSTRUCTION_ANGLES:
            errors.append(f"inversion.n_angles: at least {MIN_RECONSTRUCTION_ANGLES} projection angles are required")
        if self.experiment.needs_pair and not self.pair:
            errors.append(f"pair: the {self.experiment.value} experiment needs a phantom pair")
        if self.solver.backend is SolverBackend.CLOSED_FORM and self.solver.order > 3:
            errors.append("solver.order: the closed-form backend supports N <= 3, use the picard backend")
        if self.quadrature.angle_nodes % 4 != 0:
            errors.append("quadrature.angle_nodes: must be a multiple of 4")
        if d == 3 and self.experiment is not ExperimentKind.MULTIPLE_TAIL:
            errors.append("scene.domain: experiments run in d = 2 only")
        return errors

    def config_hash(self) -> str:
        """Stable short hash of everything that changes numerical results."""
        payload = self.model_dump(mode="json", exclude={"output_dir", "threads"})
        return stable_hash(payload)


def _merge(base: dict[str, Any], top: dict[str, Any]) -> dict[str, Any]:
    """Nested update of ``base`` by ``top``; neither argument is modified."""
    merged = dict(base)
    for key, value in top.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class _FlagLayer(ExperimentConfig):
    """Validates init kwargs only; the environment and .env are not read again."""

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)

    @classmethod
    def apply(cls, config: ExperimentConfig, flags: dict[str, Any]) -> ExperimentConfig:
        """``config`` with ``flags`` merged on top, validated as one configuration."""
        layered = cls(**_merge(config.model_dump(), flags))
        values = {name: getattr(layered, name) for name in ExperimentConfig.model_fields}
        return ExperimentConfig.model_construct(_fields_set=config.model_fields_set | set(flags), **values)


def _format_validation_error(error: ValidationError) -> list[str]:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        messages.append(f"{location}: {item['msg']}")
    return messages


def read_config_file(path: Path) -> dict[str, Any]:
    """Read a TOML (or JSON) configuration file into a nested mapping."""
    path = Path(path)
    if not path.exists():
        raise ConfigValidationError([f"config file {path} does not exist"])
    try:
        if path.suffix.lower() == ".json":
            return json.loads(path.read_text(encoding="utf-8"))
        with path.open("rb") as handle:
            return tomllib.load(handle)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigValidationError([f"config file {path} could not be parsed: {str(e)}"]) from e


def load_experiment_config(path: Optional[Path] = None, **overrides: Any) -> ExperimentConfig:
    """Build and fully validate an experiment configuration.

    Precedence, highest first: ``overrides`` (command line flags), environment,
    ``.env``, the config file, the experiment defaults. Field errors and
    hypothesis errors are collected together; nothing is raised until every
    check has run.
    """
    data: dict[str, Any] = read_config_file(path) if path is not None else {}
    flags = {key: value for key, value in overrides.items() if value is not None}
    experiment = flags.get("experiment", data.get("experiment"))
    if experiment is not None:
        try:
            defaults = ExperimentSettingsFactory.experiment_defaults(experiment)
        except ValueError as e:
            raise ConfigValidationError([f"experiment: {str(e)}"]) from e
        data = _merge(defaults, data)
    try:
        config = ExperimentConfig(**data)
        if flags:
            config = _FlagLayer.apply(config, flags)
    except ValidationError as e:
        raise ConfigValidationError(_format_validation_error(e)) from e
    errors = config.hypothesis_errors()
    if errors:
        raise ConfigValidationError(errors)
    return config


class ExperimentSettingsFactory:
    """Pure static factory for per-experiment default settings."""

    _experiment_map: dict[ExperimentKind, dict[str, Any]] = {
        ExperimentKind.FORWARD: {"solver": {"order": 2}},
        ExperimentKind.BALLISTIC_SIGMA: {"phantom": "gaussian-absorber", "solver": {"order": 0}},
        ExperimentKind.SCATTER_K: {"solver": {"order": 1}, "scene": {"point_source": True}},
        ExperimentKind.STABILITY_POINTWISE: {"pair": "const-bump"},
        ExperimentKind.STABILITY_SOBOLEV: {"pair": "gaussian-bump"},
        ExperimentKind.MULTIPLE_TAIL: {"scene": {"point_source": True}},
    }

    @staticmethod
    def experiment_defaults(experiment: ExperimentKind | str) -> dict[str, Any]:
        valid = [kind.value for kind in ExperimentSettingsFactory._experiment_map.keys()]
        try:
            experiment = ExperimentKind(experiment)
        except ValueError as e:
            raise ValueError(f"Invalid experiment: {experiment}, valid experiments are: {valid}") from e
        return dict(ExperimentSettingsFactory._experiment_map[experiment])

    @staticmethod
    def get_experiment_config(experiment: ExperimentKind | str, **overrides: Any) -> ExperimentConfig:
        """Default configuration for one experiment, with keyword overrides applied on top."""
        data = _merge(ExperimentSettingsFactory.experiment_defaults(experiment), overrides)
        return ExperimentConfig(experiment=ExperimentKind(experiment), **data)
