"""Cost, energy, latency, success and load aggregates over simulation records.

Energy is a packet count: one unit per transmission and one per reception.
A broadcast heard by k neighbors therefore costs 1 and spends 1 + k.

Query-level aggregates take a sequence of ``QueryRecord``; ``N`` in every
mean is the number of queried targets. Failed queries contribute the packets
they cost to cost and energy averages unless ``include_failed=False``; they
never contribute to latency.
"""

from collections import Counter, defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict

from level_flood.application.exceptions import MetricsInputError

__all__ = [
    "BroadcastMetrics",
    "LevelBuildingRecord",
    "MetricsReport",
    "PhaseCounters",
    "QueryRecord",
    "RunRecord",
    "average_cost",
    "average_energy_cost",
    "average_latency",
    "average_loads",
    "broadcast_metrics",
    "convergence_rate",
    "ec_level_building",
    "level_histogram",
    "mean_level",
    "per_node_average_load",
    "processed_fraction_by_level",
    "suc_ratio",
    "summarize",
]


@dataclass(frozen=True, slots=True)
class QueryRecord:
    """What one query cost and whether it found its target.

    Attributes
    ----------
    target : int
        Queried node id.
    target_level : int or None
        Hop distance of the target from the sink; None if unreachable.
    cost : int
        Transmissions during the query's phase, replies included (C_i).
    energy : int
        Transmissions plus receptions during the phase (EC_i).
    hops : int or None
        Query hop count on first arrival at the target, for successes.
    success : bool
        Whether the sink got the target's data.
    processed : int
        Nodes that processed the query, the sink included.
    fallback : bool
        The sink did not know the target's level and used the deepest one.
    load : numpy.ndarray
        Per-node sends plus receives during the phase.
    """

    target: int
    target_level: int | None
    cost: int
    energy: int
    hops: int | None
    success: bool
    processed: int
    fallback: bool
    load: np.ndarray


@dataclass(frozen=True, slots=True)
class LevelBuildingRecord:
    """Timing and traffic of the level-building phase."""

    t_start: float
    t_end: float
    lec: tuple[int, ...]
    levels: tuple[int | None, ...]
    reply_failures: int = 0


class BroadcastMetrics(BaseModel):
    """Dissemination quality of one network-wide broadcast request.

    ``received`` is r, ``transmitted`` is t (receivers that rebroadcast),
    ``reached`` is n (receivers plus the source) and ``node_count`` is m.
    """

    model_config = ConfigDict(frozen=True)

    received: int
    transmitted: int
    energy: int
    reached: int
    node_count: int

    @property
    def sr(self) -> float | None:
        """Saved rebroadcast (r - t) / r; None when nothing was received."""
        if self.received == 0:
            return None
        return (self.received - self.transmitted) / self.received

    @property
    def re(self) -> float:
        """Reachability n / m."""
        return self.reached / self.node_count


@dataclass(frozen=True, slots=True)
class RunRecord:
    """Everything one (topology seed, protocol seed, P) cell produced."""

    node_count: int
    queries: tuple[QueryRecord, ...]
    level_building: LevelBuildingRecord | None
    broadcasts: tuple[BroadcastMetrics, ...] = ()
    reply_failures: int = 0
    unknown_level_fallbacks: int = 0


class MetricsReport(BaseModel):
    """Aggregates of one cell; None marks a value with no defined input."""

    model_config = ConfigDict(frozen=True)

    average_cost: float | None
    average_energy_cost: float | None
    average_latency: float | None
    suc_ratio: float | None
    average_load: tuple[float, ...]
    convergence_rate: float | None
    ec_level_building: int | None
    sr: float | None
    ec: float | None
    re: float | None


class PhaseCounters(Protocol):
    """Per-node counters of one simulated phase."""

    node_count: int
    sent: list[int]
    received: list[int]

    def received_of(self, category: str) -> list[int]: ...

    def broadcasts_of(self, category: str) -> list[int]: ...


def _require(records: Sequence[QueryRecord], what: str) -> None:
    if not records:
        raise MetricsInputError(  # noqa: TRY003
            f"{what} needs at least one query record"
        )


def _counted(
    records: Sequence[QueryRecord], *, include_failed: bool
) -> Sequence[QueryRecord]:
    return records if include_failed else [r for r in records if r.success]


def average_cost(
    records: Sequence[QueryRecord], *, include_failed: bool = True
) -> float:
    """Mean transmissions per query."""
    chosen = _counted(records, include_failed=include_failed)
    _require(chosen, "average_cost")
    return sum(r.cost for r in chosen) / len(chosen)


def average_energy_cost(
    records: Sequence[QueryRecord], *, include_failed: bool = True
) -> float:
    """Mean transmissions plus receptions per query."""
    chosen = _counted(records, include_failed=include_failed)
    _require(chosen, "average_energy_cost")
    return sum(r.energy for r in chosen) / len(chosen)


def average_latency(records: Sequence[QueryRecord]) -> float:
    """Mean hop count at the target over successful queries.

    Raises
    ------
    MetricsInputError
        If no query succeeded.
    """
    hops = [r.hops for r in records if r.success and r.hops is not None]
    if not hops:
        raise MetricsInputError(  # noqa: TRY003
            "average_latency needs a successful query"
        )
    return sum(hops) / len(hops)


def suc_ratio(records: Sequence[QueryRecord]) -> float:
    """Percentage of queries whose data reached the sink."""
    _require(records, "suc_ratio")
    return sum(1 for r in records if r.success) / len(records) * 100


def average_loads(records: Sequence[QueryRecord]) -> np.ndarray:
    """Per-node sends plus receives averaged over all queries."""
    _require(records, "average_loads")
    total = np.zeros(len(records[0].load), dtype=np.int64)
    for record in records:
        total += record.load
    return total / len(records)


def per_node_average_load(records: Sequence[QueryRecord], node: int) -> float:
    """Average sends plus receives of ``node`` per query."""
    _require(records, "per_node_average_load")
    return sum(int(r.load[node]) for r in records) / len(records)


def convergence_rate(record: LevelBuildingRecord) -> float:
    """Virtual time from the sink's first broadcast to the last level change."""
    return record.t_end - record.t_start


def ec_level_building(record: LevelBuildingRecord) -> int:
    """Sends plus receives of every node during level building."""
    return sum(record.lec)


def broadcast_metrics(counters: PhaseCounters, source: int) -> BroadcastMetrics:
    """SR, EC and RE inputs for one broadcast phase started at ``source``."""
    heard = counters.received_of("query")
    rebroadcast = counters.broadcasts_of("query")
    receivers = [node for node in range(counters.node_count) if heard[node] > 0]
    reached = len(receivers) + (0 if heard[source] > 0 else 1)
    return BroadcastMetrics(
        received=len(receivers),
        transmitted=sum(1 for node in receivers if rebroadcast[node] > 0),
        energy=sum(counters.sent) + sum(counters.received),
        reached=reached,
        node_count=counters.node_count,
    )


def level_histogram(levels: Sequence[int | None]) -> dict[int, int]:
    """Number of nodes per level, unreachable nodes left out."""
    counts = Counter(level for level in levels if level is not None)
    return dict(sorted(counts.items()))


def processed_fraction_by_level(
    records: Sequence[QueryRecord], node_count: int
) -> dict[int, float]:
    """Mean fraction of nodes that processed a query, by target level."""
    by_level: defaultdict[int, list[float]] = defaultdict(list)
    for record in records:
        if record.target_level is not None:
            by_level[record.target_level].append(record.processed / node_count)
    return {level: float(np.mean(by_level[level])) for level in sorted(by_level)}


def _optional_mean(values: Sequence[float | None]) -> float | None:
    present = [value for value in values if value is not None]
    return sum(present) / len(present) if present else None


def summarize(run: RunRecord, *, include_failed: bool = True) -> MetricsReport:
    """Fold one cell's records into a report.

    Aggregates without input (no queries, no successes, no broadcasts) come
    back as None instead of raising.
    """
    queries = run.queries
    successes = [r for r in queries if r.success]
    counted = queries if include_failed else successes
    lb = run.level_building
    return MetricsReport(
        average_cost=average_cost(counted) if counted else None,
        average_energy_cost=average_energy_cost(counted) if counted else None,
        average_latency=average_latency(queries) if successes else None,
        suc_ratio=suc_ratio(queries) if queries else None,
        average_load=tuple(float(x) for x in average_loads(queries))
        if queries
        else (),
        convergence_rate=convergence_rate(lb) if lb is not None else None,
        ec_level_building=ec_level_building(lb) if lb is not None else None,
        sr=_optional_mean([b.sr for b in run.broadcasts]),
        ec=_optional_mean([float(b.energy) for b in run.broadcasts]),
        re=_optional_mean([b.re for b in run.broadcasts]),
    )


def mean_level(levels: Sequence[int | None]) -> float | None:
    """Mean over assigned levels; None when no node has one."""
    present = [v for v in levels if v is not None]
    return sum(present) / len(present) if present else None
