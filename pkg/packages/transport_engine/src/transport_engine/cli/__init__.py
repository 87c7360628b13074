"""Experiment runner: configuration, pipelines, artifacts and report regression."""

from .main import ExitCode, config_from_args, main, run_experiment
from .parser import build_parser
from .pipelines import SUMMARY_COLUMNS, ExperimentContext, PipelineFactory, phantom_hash
from .reports import RELATIVE_TOLERANCE, ReportDifference, diff_reports, values_match

__all__ = [
    "RELATIVE_TOLERANCE",
    "SUMMARY_COLUMNS",
    "ExitCode",
    "ExperimentContext",
    "PipelineFactory",
    "ReportDifference",
    "build_parser",
    "config_from_args",
    "diff_reports",
    "main",
    "phantom_hash",
    "run_experiment",
    "values_match",
]
