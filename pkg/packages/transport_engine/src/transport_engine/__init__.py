"""Time-dependent transport albedo lab: kernels, forward solves, inversion and stability checks."""

import sys

from dotenv import load_dotenv


def main() -> None:
    """Console entry point of the experiment runner."""
    load_dotenv()

    from transport_engine.cli import main as cli_main

    sys.exit(cli_main())
