"""Console entry point for ``level-flood`` and ``python -m level_flood``."""

import sys
from collections.abc import Sequence

from level_flood.presentation.cli import run_cli


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return its exit code."""
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())
