"""Experiment orchestration: seeds and thresholds in, per-cell records out.

A cell is one (topology seed, protocol seed, P) combination. Each cell builds
its topology, runs the protocol phase by phase on a fresh simulator and folds
the phase records into a ``RunRecord`` and a ``MetricsReport``.

Cells share nothing, so ``run_experiment`` may hand them to a process pool;
results always come back in seed order, then threshold order.

This layer has no CLI imports. All exceptions raised here are plain Python
exceptions; the presentation layer converts them to exit codes.
"""

from collections import defaultdict
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Final

import numpy as np
import structlog

from level_flood.application.baseline import FloodProtocol
from level_flood.application.exceptions import (
    EventBudgetExceededError,
    ExperimentSpecError,
)
from level_flood.application.lbf import LevelFloodProtocol, QueryOutcome
from level_flood.config.settings import ProtocolName, Settings
from level_flood.domain.metrics import (
    BroadcastMetrics,
    LevelBuildingRecord,
    MetricsReport,
    QueryRecord,
    RunRecord,
    broadcast_metrics,
    convergence_rate,
    level_histogram,
    mean_level,
    processed_fraction_by_level,
    summarize,
)
from level_flood.domain.packets import QueryKey
from level_flood.domain.topology import (
    DEFAULT_THRESHOLDS,
    LARGE_PRESETS,
    PRESETS,
    ScenarioConfig,
    Topology,
    average_degree,
    expected_degree,
    generate_topology,
    hop_distance_oracle,
    preset,
)
from level_flood.infrastructure.engine import Simulator, TimingConfig, TraceRecord

__all__ = [
    "CellResult",
    "CellSpec",
    "ComparisonRow",
    "ExperimentSpec",
    "NodeLoad",
    "SurveyRow",
    "compare",
    "node_loads",
    "parse_seeds",
    "parse_targets",
    "processed_fractions",
    "run_cell",
    "run_experiment",
    "run_survey",
    "survey_cell",
]

#: Threshold for a scenario label with no preset default.
FALLBACK_THRESHOLD: Final = 0.5

SeedPair = tuple[int, int]


# ----------------------------------------------------------------------
# Parsing of seed and target lists
# ----------------------------------------------------------------------
def _seed(token: str) -> int:
    try:
        value = int(token.strip())
    except ValueError:
        raise ExperimentSpecError(f"bad seed {token!r}") from None  # noqa: TRY003
    if value < 0:
        raise ExperimentSpecError(f"seed {value} is negative")  # noqa: TRY003
    return value


def parse_seeds(text: str) -> tuple[SeedPair, ...]:
    """Parse a seed list into (topology_seed, protocol_seed) pairs.

    ``"1..20"`` is an inclusive range whose protocol seed equals the topology
    seed, ``"3,5,9"`` lists seeds the same way, and ``"1:7,2:8"`` gives both
    halves explicitly.

    Raises
    ------
    ExperimentSpecError
        On bad syntax, negative seeds, an empty list or duplicate pairs.
    """
    text = text.strip()
    if ".." in text:
        low, _, high = text.partition("..")
        start, stop = _seed(low), _seed(high)
        if stop < start:
            raise ExperimentSpecError(  # noqa: TRY003
                f"seed range {text!r} is empty"
            )
        return tuple((seed, seed) for seed in range(start, stop + 1))

    pairs: list[SeedPair] = []
    for item in text.split(","):
        if not item.strip():
            raise ExperimentSpecError(  # noqa: TRY003
                f"empty entry in seed list {text!r}"
            )
        topo, sep, proto = item.partition(":")
        topo_seed = _seed(topo)
        pairs.append((topo_seed, _seed(proto) if sep else topo_seed))
    if len(set(pairs)) != len(pairs):
        raise ExperimentSpecError(f"duplicate seeds in {text!r}")  # noqa: TRY003
    return tuple(pairs)


def parse_targets(text: str) -> tuple[int, ...] | None:
    """Parse ``"all"`` (None) or a comma list of node ids.

    Raises
    ------
    ExperimentSpecError
        If an entry is not a non-negative integer.
    """
    if text.strip().lower() == "all":
        return None
    targets = []
    for item in text.split(","):
        try:
            node = int(item.strip())
        except ValueError:
            raise ExperimentSpecError(  # noqa: TRY003
                f"bad target {item!r}"
            ) from None
        if node < 0:
            raise ExperimentSpecError(f"target {node} is negative")  # noqa: TRY003
        targets.append(node)
    return tuple(targets)


# ----------------------------------------------------------------------
# Experiment description
# ----------------------------------------------------------------------
@dataclass(frozen=True, slots=True)
class ExperimentSpec:
    """Everything needed to rerun an experiment bit for bit.

    Attributes
    ----------
    scenario : str
        Preset name, or the row label when ``custom_scenario`` is given.
    custom_scenario : ScenarioConfig or None
        Inline scenario; its ``topology_seed`` is replaced per seed pair.
    protocol : "lbf" or "flood"
        Which protocol to run.
    thresholds : tuple of float or None
        One cell per value for each seed pair. Flooding uses ``(None,)``.
    seeds : tuple of (int, int)
        (topology_seed, protocol_seed) pairs, in output order.
    targets : tuple of int or None
        Queried node ids; None queries every non-sink node.
    """

    scenario: str
    protocol: ProtocolName
    thresholds: tuple[float | None, ...]
    seeds: tuple[SeedPair, ...]
    custom_scenario: ScenarioConfig | None = None
    targets: tuple[int, ...] | None = None
    hop_delay: float = 1.0
    jitter: float = 0.1
    rad_tmax: float = 0.5
    payload_bytes: int = 4
    broadcast_requests: int = 10
    event_budget: int = 20_000_000
    trace: bool = False
    trace_limit: int = 100_000
    include_failed_in_cost: bool = True
    allow_large_scenarios: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ExperimentSpecError("seeds must not be empty")  # noqa: TRY003
        if not self.thresholds:
            raise ExperimentSpecError(  # noqa: TRY003
                "at least one threshold is required"
            )
        if self.custom_scenario is None:
            if self.scenario not in PRESETS:
                raise ExperimentSpecError(  # noqa: TRY003
                    f"unknown scenario {self.scenario!r};"
                    f" choose one of {', '.join(PRESETS)}"
                )
            if self.scenario in LARGE_PRESETS and not self.allow_large_scenarios:
                raise ExperimentSpecError(  # noqa: TRY003
                    f"scenario {self.scenario} is large;"
                    " pass --allow-large-scenarios to run it"
                )
        for value in self.thresholds:
            if value is None:
                if self.protocol == "lbf":
                    raise ExperimentSpecError(  # noqa: TRY003
                        "lbf needs a numeric threshold"
                    )
            elif not 0 <= value <= 1:
                raise ExperimentSpecError(  # noqa: TRY003
                    f"threshold {value} must lie in [0, 1]"
                )

    @classmethod
    def from_settings(cls, settings: Settings) -> "ExperimentSpec":
        """Translate validated settings into a runnable spec.

        Raises
        ------
        ExperimentSpecError
            If the seeds, targets or scenario cannot be used.
        """
        thresholds: tuple[float | None, ...]
        if settings.protocol == "flood":
            thresholds = (None,)
        elif settings.sweep_p is not None:
            thresholds = tuple(settings.sweep_p)
        elif settings.p is not None:
            thresholds = (settings.p,)
        else:
            thresholds = (
                DEFAULT_THRESHOLDS.get(settings.scenario, FALLBACK_THRESHOLD),
            )
        return cls(
            scenario=settings.scenario,
            custom_scenario=settings.custom_scenario,
            protocol=settings.protocol,
            thresholds=thresholds,
            seeds=parse_seeds(settings.seeds),
            targets=parse_targets(settings.targets),
            hop_delay=settings.hop_delay,
            jitter=settings.jitter,
            rad_tmax=settings.rad_tmax,
            payload_bytes=settings.payload_bytes,
            broadcast_requests=settings.broadcast_requests,
            event_budget=settings.event_budget,
            trace=settings.trace is not None,
            trace_limit=settings.trace_limit,
            include_failed_in_cost=settings.include_failed_in_cost,
            allow_large_scenarios=settings.allow_large_scenarios,
            workers=settings.workers,
        )

    def scenario_config(self, topology_seed: int) -> ScenarioConfig:
        """The deployment for one topology seed."""
        if self.custom_scenario is not None:
            return self.custom_scenario.model_copy(
                update={"topology_seed": topology_seed}
            )
        return preset(self.scenario, topology_seed=topology_seed)

    def timing(self, protocol_seed: int) -> TimingConfig:
        return TimingConfig(
            hop_delay=self.hop_delay,
            jitter_max=self.jitter,
            rad_t_max=self.rad_tmax,
            protocol_seed=protocol_seed,
        )

    def cells(self) -> list["CellSpec"]:
        """Every cell in output order: seeds first, thresholds second."""
        return [
            CellSpec(spec=self, topology_seed=topo, protocol_seed=proto, threshold=p)
            for topo, proto in self.seeds
            for p in self.thresholds
        ]


@dataclass(frozen=True, slots=True)
class CellSpec:
    """One (topology seed, protocol seed, P) combination of an experiment."""

    spec: ExperimentSpec
    topology_seed: int
    protocol_seed: int
    threshold: float | None


@dataclass(frozen=True, slots=True)
class CellResult:
    """What one cell produced.

    ``levels`` are protocol-assigned levels for LBF and oracle hop counts for
    flooding, which builds none.
    """

    cell: CellSpec
    run: RunRecord
    report: MetricsReport
    levels: tuple[int | None, ...]
    oracle_levels: tuple[int | None, ...]
    degrees: tuple[int, ...]
    trace: tuple[str, ...] = ()

    @property
    def max_level(self) -> int | None:
        present = [level for level in self.levels if level is not None]
        return max(present) if present else None

    @property
    def avg_level(self) -> float | None:
        return mean_level(self.levels)


# ----------------------------------------------------------------------
# Running one cell
# ----------------------------------------------------------------------
@dataclass(slots=True)
class _Phases:
    """Records collected while a cell runs."""

    queries: list[QueryRecord] = field(default_factory=list)
    broadcasts: list[BroadcastMetrics] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)

    def keep(self, record: TraceRecord) -> TraceRecord:
        self.trace.extend(record.events)
        return record


def _resolve_targets(spec: ExperimentSpec, topo: Topology) -> list[int]:
    if spec.targets is None:
        return [node for node in range(topo.node_count) if node != topo.sink_id]
    bad = [
        node
        for node in spec.targets
        if node == topo.sink_id or node >= topo.node_count
    ]
    if bad:
        raise ExperimentSpecError(  # noqa: TRY003
            f"targets {bad} are the sink or outside 0..{topo.node_count - 1}"
        )
    return list(spec.targets)


def _query_record(
    target: int,
    target_level: int | None,
    record: TraceRecord,
    outcome: QueryOutcome,
    processed: int,
) -> QueryRecord:
    sent = np.asarray(record.sent, dtype=np.int64)
    received = np.asarray(record.received, dtype=np.int64)
    return QueryRecord(
        target=target,
        target_level=target_level,
        cost=record.total_sent,
        energy=record.total_sent + record.total_received,
        hops=outcome.hops if outcome.success else None,
        success=outcome.success,
        processed=processed,
        fallback=outcome.fallback,
        load=sent + received,
    )


def _build_levels(
    protocol: LevelFloodProtocol, simulator: Simulator, phases: _Phases
) -> LevelBuildingRecord:
    protocol.start_level_building()
    record = phases.keep(simulator.run_to_quiescence())
    return LevelBuildingRecord(
        t_start=record.t_start,
        t_end=record.marks.get("level_assigned", record.t_start),
        lec=tuple(record.load(node) for node in range(record.node_count)),
        levels=tuple(protocol.levels),
        reply_failures=protocol.reply_failures,
    )


def _run_lbf(
    cell: CellSpec,
    topo: Topology,
    oracle: dict[int, int | None],
    simulator: Simulator,
    phases: _Phases,
) -> tuple[RunRecord, tuple[int | None, ...]]:
    spec = cell.spec
    if cell.threshold is None:
        raise ExperimentSpecError("lbf needs a numeric threshold")  # noqa: TRY003
    protocol = LevelFloodProtocol(
        topo, simulator, threshold=cell.threshold, payload_bytes=spec.payload_bytes
    )
    level_building = _build_levels(protocol, simulator, phases)
    structlog.get_logger(__name__).debug(
        "levels built",
        topology_seed=cell.topology_seed,
        max_level=protocol.sink.max_known_level,
        convergence=convergence_rate(level_building),
        reply_failures=protocol.reply_failures,
    )

    for target in _resolve_targets(spec, topo):
        protocol.reset_query_state()
        seq = protocol.start_query(target)
        record = phases.keep(simulator.run_to_quiescence())
        phases.queries.append(
            _query_record(
                target,
                oracle[target],
                record,
                protocol.outcome(seq),
                protocol.processed_counts.get(QueryKey(topo.sink_id, seq), 0),
            )
        )

    for _ in range(spec.broadcast_requests):
        protocol.reset_query_state()
        protocol.start_broadcast()
        record = phases.keep(simulator.run_to_quiescence())
        phases.broadcasts.append(broadcast_metrics(record, topo.sink_id))

    run = RunRecord(
        node_count=topo.node_count,
        queries=tuple(phases.queries),
        level_building=level_building,
        broadcasts=tuple(phases.broadcasts),
        reply_failures=protocol.reply_failures + protocol.data_failures,
        unknown_level_fallbacks=protocol.unknown_level_fallbacks,
    )
    return run, tuple(protocol.levels)


def _run_flood(
    cell: CellSpec,
    topo: Topology,
    oracle: dict[int, int | None],
    simulator: Simulator,
    phases: _Phases,
) -> tuple[RunRecord, tuple[int | None, ...]]:
    spec = cell.spec
    protocol = FloodProtocol(topo, simulator, payload_bytes=spec.payload_bytes)
    ttl = max((level for level in oracle.values() if level is not None), default=0)

    for target in _resolve_targets(spec, topo):
        protocol.reset_query_state()
        seq = protocol.flood_query(target, ttl)
        record = phases.keep(simulator.run_to_quiescence())
        phases.queries.append(
            _query_record(
                target,
                oracle[target],
                record,
                protocol.outcome(seq),
                protocol.processed_counts.get(QueryKey(topo.sink_id, seq), 0),
            )
        )

    for _ in range(spec.broadcast_requests):
        protocol.reset_query_state()
        protocol.flood_broadcast(ttl)
        record = phases.keep(simulator.run_to_quiescence())
        phases.broadcasts.append(broadcast_metrics(record, topo.sink_id))

    run = RunRecord(
        node_count=topo.node_count,
        queries=tuple(phases.queries),
        level_building=None,
        broadcasts=tuple(phases.broadcasts),
        reply_failures=protocol.reply_failures,
    )
    return run, tuple(oracle[node] for node in range(topo.node_count))


def run_cell(cell: CellSpec) -> CellResult:
    """Run one cell from topology generation to its metrics report.

    Raises
    ------
    EventBudgetExceededError
        If a phase exceeds the event budget; a note names the seed pair.
    ExperimentSpecError
        If an explicit target is the sink or not in the topology.
    """
    spec = cell.spec
    topo = generate_topology(spec.scenario_config(cell.topology_seed))
    oracle = hop_distance_oracle(topo)
    simulator = Simulator(
        topo,
        spec.timing(cell.protocol_seed),
        event_budget=spec.event_budget,
        trace_limit=spec.trace_limit if spec.trace else 0,
    )
    phases = _Phases()
    runner = _run_lbf if spec.protocol == "lbf" else _run_flood
    try:
        run, levels = runner(cell, topo, oracle, simulator, phases)
    except EventBudgetExceededError as err:
        err.add_note(
            f"replay with --scenario {spec.scenario} --protocol {spec.protocol}"
            f" --seeds {cell.topology_seed}:{cell.protocol_seed}"
        )
        structlog.get_logger(__name__).error(
            "cell aborted",
            scenario=spec.scenario,
            protocol=spec.protocol,
            topology_seed=cell.topology_seed,
            protocol_seed=cell.protocol_seed,
            threshold=cell.threshold,
        )
        raise

    report = summarize(run, include_failed=spec.include_failed_in_cost)
    structlog.get_logger(__name__).debug(
        "cell finished",
        topology_seed=cell.topology_seed,
        protocol_seed=cell.protocol_seed,
        threshold=cell.threshold,
        suc_ratio=report.suc_ratio,
    )
    return CellResult(
        cell=cell,
        run=run,
        report=report,
        levels=levels,
        oracle_levels=tuple(oracle[node] for node in range(topo.node_count)),
        degrees=tuple(topo.degree(node) for node in range(topo.node_count)),
        trace=tuple(phases.trace),
    )


def _map_cells(cells: Sequence[CellSpec], workers: int) -> list[CellResult]:
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        return list(pool.map(run_cell, cells))


def run_experiment(spec: ExperimentSpec) -> list[CellResult]:
    """Run every cell of ``spec``; results keep seed-then-threshold order.

    Returns
    -------
    list[CellResult]
        One result per (seed pair, threshold) cell.
    """
    cells = spec.cells()
    logger = structlog.get_logger(__name__)
    logger.info(
        "experiment started",
        scenario=spec.scenario,
        protocol=spec.protocol,
        thresholds=list(spec.thresholds),
        cells=len(cells),
        workers=spec.workers,
    )
    results = _map_cells(cells, spec.workers)
    logger.info(
        "experiment finished",
        scenario=spec.scenario,
        protocol=spec.protocol,
        cells=len(results),
    )
    return results


# ----------------------------------------------------------------------
# Paired comparison
# ----------------------------------------------------------------------
@dataclass(frozen=True, slots=True)
class ComparisonRow:
    """Ratios A/B for one seed pair, or their means when ``label`` is "mean".

    A ratio is None when either side has no value or B's value is zero.
    """

    label: str
    topology_seed: int | None
    protocol_seed: int | None
    cost: float | None
    energy: float | None
    latency: float | None
    suc_ratio: float | None


def _ratio(a: float | None, b: float | None) -> float | None:
    if a is None or b is None or b == 0:
        return None
    return a / b


def _mean(values: Iterable[float | None]) -> float | None:
    present = [value for value in values if value is not None]
    return sum(present) / len(present) if present else None


def compare(spec_a: ExperimentSpec, spec_b: ExperimentSpec) -> list[ComparisonRow]:
    """Run two specs on the same scenario and seeds and pair their reports.

    Returns
    -------
    list[ComparisonRow]
        One row per seed pair, then a "mean" row.

    Raises
    ------
    ExperimentSpecError
        If the specs differ in scenario or seeds, or either sweeps thresholds.
    """
    if (spec_a.scenario, spec_a.custom_scenario) != (
        spec_b.scenario,
        spec_b.custom_scenario,
    ):
        raise ExperimentSpecError(  # noqa: TRY003
            "compared specs must use the same scenario"
        )
    if spec_a.seeds != spec_b.seeds:
        raise ExperimentSpecError(  # noqa: TRY003
            "compared specs must use the same seeds"
        )
    if len(spec_a.thresholds) != 1 or len(spec_b.thresholds) != 1:
        raise ExperimentSpecError(  # noqa: TRY003
            "compare takes a single threshold per side"
        )

    rows = []
    for a, b in zip(run_experiment(spec_a), run_experiment(spec_b), strict=True):
        ra, rb = a.report, b.report
        rows.append(
            ComparisonRow(
                label="seed",
                topology_seed=a.cell.topology_seed,
                protocol_seed=a.cell.protocol_seed,
                cost=_ratio(ra.average_cost, rb.average_cost),
                energy=_ratio(ra.average_energy_cost, rb.average_energy_cost),
                latency=_ratio(ra.average_latency, rb.average_latency),
                suc_ratio=_ratio(ra.suc_ratio, rb.suc_ratio),
            )
        )
    rows.append(
        ComparisonRow(
            label="mean",
            topology_seed=None,
            protocol_seed=None,
            cost=_mean(row.cost for row in rows),
            energy=_mean(row.energy for row in rows),
            latency=_mean(row.latency for row in rows),
            suc_ratio=_mean(row.suc_ratio for row in rows),
        )
    )
    return rows


# ----------------------------------------------------------------------
# Level-building survey, loads and processed fractions
# ----------------------------------------------------------------------
@dataclass(frozen=True, slots=True)
class SurveyRow:
    """Topology and level-building summary of one seed pair."""

    scenario: str
    topology_seed: int
    protocol_seed: int
    node_count: int
    avg_degree: float
    expected_degree: float | None
    connected: bool
    reachable: int
    max_level: int | None
    avg_level: float | None
    convergence_rate: float
    lb_cost: int
    lb_energy: int
    levels_match_oracle: bool
    histogram: dict[int, int]


def survey_cell(spec: ExperimentSpec, seeds: SeedPair) -> SurveyRow:
    """Generate one topology and run only level building on it."""
    topology_seed, protocol_seed = seeds
    config = spec.scenario_config(topology_seed)
    topo = generate_topology(config)
    oracle = hop_distance_oracle(topo)
    simulator = Simulator(
        topo, spec.timing(protocol_seed), event_budget=spec.event_budget
    )
    protocol = LevelFloodProtocol(
        topo, simulator, threshold=FALLBACK_THRESHOLD, payload_bytes=0
    )
    protocol.start_level_building()
    record = simulator.run_to_quiescence()
    levels = protocol.levels
    present = [level for level in levels if level is not None]
    return SurveyRow(
        scenario=spec.scenario,
        topology_seed=topology_seed,
        protocol_seed=protocol_seed,
        node_count=topo.node_count,
        avg_degree=average_degree(topo),
        expected_degree=expected_degree(config)
        if config.comm_radius <= config.side_length
        else None,
        connected=topo.is_connected(),
        reachable=sum(1 for level in oracle.values() if level is not None),
        max_level=max(present) if present else None,
        avg_level=mean_level(levels),
        convergence_rate=record.marks.get("level_assigned", record.t_start)
        - record.t_start,
        lb_cost=record.total_sent,
        lb_energy=record.total_sent + record.total_received,
        levels_match_oracle=all(
            levels[node] == oracle[node] for node in range(topo.node_count)
        ),
        histogram=level_histogram(levels),
    )


def run_survey(spec: ExperimentSpec) -> list[SurveyRow]:
    """``survey_cell`` for every seed pair of ``spec``, in order."""
    return [survey_cell(spec, seeds) for seeds in spec.seeds]


@dataclass(frozen=True, slots=True)
class NodeLoad:
    node: int
    level: int | None
    degree: int
    average_load: float


def node_loads(result: CellResult) -> list[NodeLoad]:
    """Per-node level, degree and average load of one cell."""
    loads = result.report.average_load or (0.0,) * len(result.degrees)
    return [
        NodeLoad(node=node, level=level, degree=degree, average_load=load)
        for node, (level, degree, load) in enumerate(
            zip(result.levels, result.degrees, loads, strict=True)
        )
    ]


def processed_fractions(results: Sequence[CellResult]) -> dict[int, float]:
    """Mean fraction of nodes processing a query, by target level.

    Averages the per-cell fractions, so every cell weighs the same.

    Raises
    ------
    ExperimentSpecError
        If ``results`` is empty.
    """
    if not results:
        raise ExperimentSpecError("no results to summarize")  # noqa: TRY003
    by_level: defaultdict[int, list[float]] = defaultdict(list)
    for result in results:
        fractions = processed_fraction_by_level(
            result.run.queries, result.run.node_count
        )
        for level, fraction in fractions.items():
            by_level[level].append(fraction)
    return {level: float(np.mean(by_level[level])) for level in sorted(by_level)}
