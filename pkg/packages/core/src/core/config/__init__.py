"""Core configuration modules."""

from .experiment import (
    DEFAULT_EXPONENTS,
    MIN_RECONSTRUCTION_ANGLES,
    DomainSettings,
    ExperimentConfig,
    ExperimentSettingsFactory,
    InversionSettings,
    KernelSettings,
    QuadratureSettings,
    SceneSettings,
    SolverSettings,
    StabilitySettings,
    load_experiment_config,
    read_config_file,
)

__all__ = [
    "DEFAULT_EXPONENTS",
    "MIN_RECONSTRUCTION_ANGLES",
    "DomainSettings",
    "ExperimentConfig",
    "ExperimentSettingsFactory",
    "InversionSettings",
    "KernelSettings",
    "QuadratureSettings",
    "SceneSettings",
    "SolverSettings",
    "StabilitySettings",
    "load_experiment_config",
    "read_config_file",
]
