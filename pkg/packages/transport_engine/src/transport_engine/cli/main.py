"""Command line entry point: ``run``, ``validate-config``, ``diff-reports`` and ``list-phantoms``."""

import argparse
import logging
import sys
from enum import IntEnum
from pathlib import Path
from typing import Optional, Sequence

from core.adapters import FilesystemArtifactAdapter
from core.config import ExperimentConfig, load_experiment_config
from core.errors import ConfigValidationError, SchemaMismatchError
from core.models import SummaryArtifact
from core.repositories import ArtifactRepository
from transport_engine.cli.parser import build_parser
from transport_engine.cli.pipelines import SUMMARY_COLUMNS, ExperimentContext, PipelineFactory
from transport_engine.cli.reports import diff_reports
from transport_engine.coefficients import PhantomFactory, load_phantom_file
from transport_engine.errors import NumericalGuardError, TransportLabError

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    SUCCESS = 0
    REPORTS_DIFFER = 1
    INVALID = 2
    NUMERICAL_GUARD = 3


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        "experiment": args.experiment,
        "phantom": args.phantom,
        "pair": args.pair,
        "phantom_file": args.phantom_file,
        "output_dir": args.out,
        "threads": args.threads,
        "seed": args.seed,
    }
    return load_experiment_config(args.config, **overrides)


def run_experiment(config: ExperimentConfig, output_dir: Optional[Path] = None) -> ExperimentContext:
    """Run the configured pipeline; artifacts appear in the output directory only if it succeeds."""
    output_dir = Path(output_dir or config.output_dir)
    pipeline = PipelineFactory.get_pipeline(config.experiment)
    logger.info(f"Running {config.experiment.value} (config {config.config_hash()}) into {output_dir}")
    with FilesystemArtifactAdapter(output_dir) as adapter:
        repository = ArtifactRepository(adapter)
        context = ExperimentContext(config=config, repository=repository)
        pipeline(context)
        repository.save_table(
            "summary.csv",
            SUMMARY_COLUMNS,
            context.summary,
            SummaryArtifact(config_hash=context.config_hash, experiment=config.experiment.value),
        )
    return context


def _run(args: argparse.Namespace) -> ExitCode:
    config = config_from_args(args)
    context = run_experiment(config)
    for row in context.summary:
        print(f"{row['quantity']}: {row['value']}")
    return ExitCode.SUCCESS


def _validate(args: argparse.Namespace) -> ExitCode:
    config = config_from_args(args)
    print(f"Configuration is valid: {config.experiment.value}, hash {config.config_hash()}")
    return ExitCode.SUCCESS


def _diff(args: argparse.Namespace) -> ExitCode:
    differences = diff_reports(args.first, args.second, relative_tolerance=args.rtol)
    for difference in differences:
        print(f"{difference.path}: {difference.first!r} != {difference.second!r}")
    return ExitCode.REPORTS_DIFFER if differences else ExitCode.SUCCESS


def _list_phantoms(args: argparse.Namespace) -> ExitCode:
    library = load_phantom_file(args.phantom_file) if args.phantom_file else None
    names = PhantomFactory.phantom_names() + [spec.name for spec in (library.phantoms if library else [])]
    pairs = PhantomFactory.pair_names() + [pair.name for pair in (library.pairs if library else [])]
    print("Phantoms:")
    for name in names:
        spec = PhantomFactory.get_phantom(name, library)
        membership = spec.membership
        suffix = f" [M = {membership.bound:g}, r~ = {membership.smoothness:g}]" if membership else ""
        print(f"  {name}: {spec.description}{suffix}")
    print("Pairs:")
    for name in pairs:
        print(f"  {name}")
    return ExitCode.SUCCESS


_command_map = {
    "run": _run,
    "validate-config": _validate,
    "diff-reports": _diff,
    "list-phantoms": _list_phantoms,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return int(_command_map[args.command](args))
    except ConfigValidationError as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        return int(ExitCode.INVALID)
    except NumericalGuardError as e:
        print(f"Numerical guard tripped: {str(e)}", file=sys.stderr)
        return int(ExitCode.NUMERICAL_GUARD)
    except (SchemaMismatchError, TransportLabError, ValueError) as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        return int(ExitCode.INVALID)
