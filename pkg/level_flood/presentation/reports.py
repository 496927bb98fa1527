"""CSV rendering of experiment, comparison, survey, load and fraction results.

Every table is written with ``csv.DictWriter`` and ``\\n`` line endings. Floats
go out through ``repr`` so a rerun of the same seeds is byte-identical, and
undefined values are empty cells.
"""

import csv
from collections.abc import Iterable, Mapping, Sequence
from typing import TYPE_CHECKING, Final, TextIO

if TYPE_CHECKING:
    from level_flood.application.services import (
        CellResult,
        ComparisonRow,
        NodeLoad,
        SurveyRow,
    )

__all__ = [
    "COMPARE_COLUMNS",
    "EXPERIMENT_COLUMNS",
    "FRACTION_COLUMNS",
    "LOAD_COLUMNS",
    "SURVEY_COLUMNS",
    "cell_row",
    "format_value",
    "write_comparison",
    "write_experiment",
    "write_fractions",
    "write_loads",
    "write_survey",
]

#: Column set of ``run`` output, in order. Changing it is a format break.
EXPERIMENT_COLUMNS: Final = (
    "scenario",
    "protocol",
    "P",
    "topo_seed",
    "proto_seed",
    "avg_cost",
    "avg_energy",
    "avg_latency",
    "suc_ratio",
    "convergence_rate",
    "ec_level_building",
    "sr",
    "ec",
    "re",
    "max_level",
    "avg_level",
    "reply_failures",
    "unknown_level_fallbacks",
)

COMPARE_COLUMNS: Final = (
    "row",
    "topo_seed",
    "proto_seed",
    "cost_ratio",
    "energy_ratio",
    "latency_ratio",
    "suc_ratio_ratio",
)

SURVEY_COLUMNS: Final = (
    "scenario",
    "topo_seed",
    "proto_seed",
    "node_count",
    "avg_degree",
    "expected_degree",
    "connected",
    "reachable",
    "max_level",
    "avg_level",
    "convergence_rate",
    "lb_cost",
    "lb_energy",
    "levels_match_oracle",
    "histogram",
)

LOAD_COLUMNS: Final = ("node", "level", "degree", "average_load")

FRACTION_COLUMNS: Final = ("level", "processed_fraction")


def format_value(value: object) -> str:
    """Render one cell: None as empty, floats exactly, booleans as 0/1."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write(
    stream: TextIO, columns: Sequence[str], rows: Iterable[Mapping[str, object]]
) -> None:
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: format_value(value) for key, value in row.items()})


def cell_row(result: "CellResult") -> dict[str, object]:
    """One ``run`` row keyed by EXPERIMENT_COLUMNS."""
    cell, report, run = result.cell, result.report, result.run
    return {
        "scenario": cell.spec.scenario,
        "protocol": cell.spec.protocol,
        "P": cell.threshold,
        "topo_seed": cell.topology_seed,
        "proto_seed": cell.protocol_seed,
        "avg_cost": report.average_cost,
        "avg_energy": report.average_energy_cost,
        "avg_latency": report.average_latency,
        "suc_ratio": report.suc_ratio,
        "convergence_rate": report.convergence_rate,
        "ec_level_building": report.ec_level_building,
        "sr": report.sr,
        "ec": report.ec,
        "re": report.re,
        "max_level": result.max_level,
        "avg_level": result.avg_level,
        "reply_failures": run.reply_failures,
        "unknown_level_fallbacks": run.unknown_level_fallbacks,
    }


def write_experiment(stream: TextIO, results: Iterable["CellResult"]) -> None:
    """Header plus one row per cell, in the order given."""
    _write(stream, EXPERIMENT_COLUMNS, (cell_row(result) for result in results))


def write_comparison(stream: TextIO, rows: Iterable["ComparisonRow"]) -> None:
    _write(
        stream,
        COMPARE_COLUMNS,
        (
            {
                "row": row.label,
                "topo_seed": row.topology_seed,
                "proto_seed": row.protocol_seed,
                "cost_ratio": row.cost,
                "energy_ratio": row.energy,
                "latency_ratio": row.latency,
                "suc_ratio_ratio": row.suc_ratio,
            }
            for row in rows
        ),
    )


def _histogram(counts: Mapping[int, int]) -> str:
    return " ".join(f"{level}:{count}" for level, count in counts.items())


def write_survey(stream: TextIO, rows: Iterable["SurveyRow"]) -> None:
    """Survey rows; the histogram cell reads ``level:count`` pairs."""
    _write(
        stream,
        SURVEY_COLUMNS,
        (
            {
                "scenario": row.scenario,
                "topo_seed": row.topology_seed,
                "proto_seed": row.protocol_seed,
                "node_count": row.node_count,
                "avg_degree": row.avg_degree,
                "expected_degree": row.expected_degree,
                "connected": row.connected,
                "reachable": row.reachable,
                "max_level": row.max_level,
                "avg_level": row.avg_level,
                "convergence_rate": row.convergence_rate,
                "lb_cost": row.lb_cost,
                "lb_energy": row.lb_energy,
                "levels_match_oracle": row.levels_match_oracle,
                "histogram": _histogram(row.histogram),
            }
            for row in rows
        ),
    )


def write_loads(stream: TextIO, loads: Iterable["NodeLoad"]) -> None:
    _write(
        stream,
        LOAD_COLUMNS,
        (
            {
                "node": load.node,
                "level": load.level,
                "degree": load.degree,
                "average_load": load.average_load,
            }
            for load in loads
        ),
    )


def write_fractions(stream: TextIO, fractions: Mapping[int, float]) -> None:
    _write(
        stream,
        FRACTION_COLUMNS,
        (
            {"level": level, "processed_fraction": fraction}
            for level, fraction in fractions.items()
        ),
    )
