"""Command-line surface: ``level-flood [--config PATH] <command> [flags]``.

Commands
--------
run        One CSV row per (seed pair, P) cell.
compare    Paired ratios of two protocols on the same scenario and seeds.
survey     Topology and level-building summary per seed pair.
loads      Per-node average load of the first cell.
fractions  Fraction of nodes processing a query, by target level.
decode     Decode one hex-encoded wire packet.

Exit codes: 0 on success, 1 on a contract violation, 2 on a bad experiment
description, 3 when a run exceeds its event budget.
"""

import argparse
import contextlib
import sys
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Final, TextIO

import structlog
from pydantic import ValidationError

from level_flood.application.exceptions import (
    ContractViolationError,
    EventBudgetExceededError,
    ExperimentSpecError,
    InvalidQueryError,
    MetricsInputError,
    WireError,
)
from level_flood.application.services import (
    ExperimentSpec,
    compare,
    node_loads,
    processed_fractions,
    run_experiment,
    run_survey,
)
from level_flood.config.logging import configure_logging
from level_flood.config.settings import Settings, load_settings
from level_flood.infrastructure import wire
from level_flood.presentation import reports

__all__ = ["EXIT_BUDGET", "EXIT_CONTRACT", "EXIT_USAGE", "build_parser", "run_cli"]

EXIT_CONTRACT: Final = 1
EXIT_USAGE: Final = 2
EXIT_BUDGET: Final = 3

Command = Callable[[argparse.Namespace, Settings], int]


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(  # noqa: TRY003
            f"expected comma-separated numbers, got {text!r}"
        ) from None


def _experiment_flags() -> argparse.ArgumentParser:
    """Flags shared by every command that runs cells.

    Defaults are None so an unset flag leaves lower configuration layers alone.
    """
    flags = argparse.ArgumentParser(add_help=False)
    group = flags.add_argument_group("experiment")
    group.add_argument("--scenario", help="preset s1..s5 or a label")
    group.add_argument("--protocol", choices=("lbf", "flood"))
    thresholds = group.add_mutually_exclusive_group()
    thresholds.add_argument("--p", type=float, help="rebroadcast threshold P")
    thresholds.add_argument(
        "--sweep-p", type=_float_list, help="comma list of thresholds"
    )
    group.add_argument("--seeds", help='"1..20", "3,5,9" or "1:7,2:8"')
    group.add_argument("--targets", help='"all" or a comma list of node ids')
    group.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    group.add_argument("--trace", type=Path, help="write the event log here")
    group.add_argument("--hop-delay", type=float)
    group.add_argument("--jitter", type=float)
    group.add_argument("--rad-tmax", type=float)
    group.add_argument("--payload-bytes", type=int)
    group.add_argument("--broadcast-requests", type=int)
    group.add_argument("--workers", type=int)
    group.add_argument(
        "--allow-large-scenarios", action=argparse.BooleanOptionalAction
    )
    return flags


def build_parser() -> argparse.ArgumentParser:
    """The full parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="level-flood",
        description="Level-Based Flooding and basic flooding over simulated "
        "sensor networks.",
    )
    parser.add_argument("--config", type=Path, help="TOML file of settings")
    commands = parser.add_subparsers(dest="command", required=True)
    shared = [_experiment_flags()]

    commands.add_parser("run", parents=shared, help="run an experiment")
    compare_cmd = commands.add_parser(
        "compare", parents=shared, help="paired ratios of two protocols"
    )
    compare_cmd.add_argument(
        "--against",
        choices=("lbf", "flood"),
        default="flood",
        help="protocol in the denominator (default: flood)",
    )
    compare_cmd.add_argument(
        "--against-p", type=float, help="threshold of the denominator side"
    )
    commands.add_parser("survey", parents=shared, help="level-building survey")
    commands.add_parser("loads", parents=shared, help="per-node average load")
    commands.add_parser(
        "fractions", parents=shared, help="processed fraction by target level"
    )
    decode_cmd = commands.add_parser("decode", help="decode one wire packet")
    decode_cmd.add_argument("hex", help="packet bytes as hex; spaces allowed")
    return parser


@contextlib.contextmanager
def _output(path: Path | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with path.open("w", encoding="utf-8", newline="") as stream:
        yield stream


def _write_trace(path: Path | None, lines: Iterable[str]) -> None:
    if path is None:
        return
    with path.open("w", encoding="utf-8") as stream:
        for line in lines:
            stream.write(line + "\n")


def _cmd_run(_args: argparse.Namespace, settings: Settings) -> int:
    results = run_experiment(ExperimentSpec.from_settings(settings))
    with _output(settings.out) as stream:
        reports.write_experiment(stream, results)
    _write_trace(settings.trace, (line for r in results for line in r.trace))
    return 0


def _cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    spec_a = ExperimentSpec.from_settings(settings)
    other = settings.model_copy(
        update={"protocol": args.against, "p": args.against_p, "sweep_p": None}
    )
    spec_b = ExperimentSpec.from_settings(other)
    rows = compare(spec_a, spec_b)
    with _output(settings.out) as stream:
        reports.write_comparison(stream, rows)
    return 0


def _cmd_survey(_args: argparse.Namespace, settings: Settings) -> int:
    rows = run_survey(ExperimentSpec.from_settings(settings))
    with _output(settings.out) as stream:
        reports.write_survey(stream, rows)
    return 0


def _cmd_loads(_args: argparse.Namespace, settings: Settings) -> int:
    spec = ExperimentSpec.from_settings(settings)
    first = replace(spec, seeds=spec.seeds[:1], thresholds=spec.thresholds[:1])
    (result,) = run_experiment(first)
    with _output(settings.out) as stream:
        reports.write_loads(stream, node_loads(result))
    return 0


def _cmd_fractions(_args: argparse.Namespace, settings: Settings) -> int:
    spec = ExperimentSpec.from_settings(settings)
    results = run_experiment(replace(spec, thresholds=spec.thresholds[:1]))
    with _output(settings.out) as stream:
        reports.write_fractions(stream, processed_fractions(results))
    return 0


def _cmd_decode(args: argparse.Namespace, _settings: Settings) -> int:
    try:
        data = bytes.fromhex(args.hex)
    except ValueError:
        raise ExperimentSpecError(  # noqa: TRY003
            f"{args.hex!r} is not hex"
        ) from None
    packet = wire.decode(data)
    sys.stdout.write(wire.describe(packet) + "\n")
    return 0


_COMMANDS: Final[dict[str, Command]] = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "survey": _cmd_survey,
    "loads": _cmd_loads,
    "fractions": _cmd_fractions,
    "decode": _cmd_decode,
}


def _overrides(args: argparse.Namespace) -> dict[str, object]:
    """Parsed flags that name a Settings field."""
    return {
        key: value
        for key, value in vars(args).items()
        if key in Settings.model_fields and value is not None
    }


def _report(message: str, notes: Sequence[str] = ()) -> None:
    sys.stderr.write(f"level-flood: {message}\n")
    for note in notes:
        sys.stderr.write(f"  {note}\n")


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the command and return the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.config, **_overrides(args))
        configure_logging(settings)
        code = _COMMANDS[args.command](args, settings)
    except (ExperimentSpecError, ValidationError) as err:
        _report(f"invalid experiment: {err}")
        return EXIT_USAGE
    except EventBudgetExceededError as err:
        _report(str(err), getattr(err, "__notes__", ()))
        return EXIT_BUDGET
    except (
        ContractViolationError,
        InvalidQueryError,
        MetricsInputError,
        WireError,
    ) as err:
        structlog.get_logger(__name__).error(
            "command failed", command=args.command, error=str(err)
        )
        _report(str(err))
        return EXIT_CONTRACT
    return code
