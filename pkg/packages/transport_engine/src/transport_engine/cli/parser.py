import argparse
from pathlib import Path

from core.types import ExperimentKind

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="TOML or JSON experiment configuration")
    parser.add_argument(
        "--experiment", choices=[kind.value for kind in ExperimentKind], default=None, help="Pipeline to run"
    )
    parser.add_argument("--phantom", default=None, help="Catalog phantom name")
    parser.add_argument("--pair", default=None, help="Catalog phantom pair name")
    parser.add_argument("--phantom-file", type=Path, default=None, help="Extra phantom definitions")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (default: available cores)")
    parser.add_argument("--seed", type=int, default=None, help="Seed for entry nodes and probes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transport-engine",
        description="Forward solves, inversions and stability checks for the time-dependent transport albedo operator",
    )
    parser.add_argument("--log-level", choices=LOG_LEVELS, default="INFO", type=str.upper)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run one experiment and write its artifacts")
    _config_flags(run)

    validate = commands.add_parser("validate-config", help="Check a configuration without running anything")
    _config_flags(validate)

    diff = commands.add_parser("diff-reports", help="Compare two reports or result tables")
    diff.add_argument("first", type=Path)
    diff.add_argument("second", type=Path)
    diff.add_argument("--rtol", type=float, default=1e-9, help="Relative tolerance for numeric values")

    phantoms = commands.add_parser("list-phantoms", help="List catalog phantoms and phantom pairs")
    phantoms.add_argument("--phantom-file", type=Path, default=None, help="Extra phantom definitions")
    return parser
