"""Deterministic discrete-event core.

One ``Simulator`` owns the virtual clock, a heap of pending events and the
send/receive counters of the current phase. Events are plain tuples
``(fire_time, sequence_no, kind, node, peer, payload)``; the strictly
increasing ``sequence_no`` breaks time ties in scheduling order, so heap
comparison never reaches the payload and the total order is reproducible.

Protocols plug in through the ``PacketHandler`` protocol and drive the run in
phases: schedule or send something, call ``run_to_quiescence``, read the
returned ``TraceRecord``. Each call returns the counters accumulated since the
previous call and starts a fresh record.
"""

import heapq
import itertools
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Final, Protocol, Self, cast

import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from level_flood.application.exceptions import (
    ContractViolationError,
    EventBudgetExceededError,
)
from level_flood.domain.packets import (
    DataBackPacket,
    LevelBackPacket,
    LevelBuildingPacket,
    QueryKey,
    QueryPacket,
    SimPacket,
)
from level_flood.domain.topology import Topology
from level_flood.infrastructure import wire
from level_flood.infrastructure.random_streams import RandomStreams

__all__ = [
    "DEFAULT_EVENT_BUDGET",
    "EventKind",
    "PacketHandler",
    "Simulator",
    "TimingConfig",
    "TraceRecord",
]

DEFAULT_EVENT_BUDGET: Final = 20_000_000

_WIRE_TYPES: Final = (
    LevelBuildingPacket,
    LevelBackPacket,
    QueryPacket,
    DataBackPacket,
)


class EventKind(IntEnum):
    DELIVER = 0
    RAD_EXPIRY = 1


class TimingConfig(BaseModel):
    """Per-hop delay, jitter, RAD window and the seed behind all protocol draws.

    Attributes
    ----------
    hop_delay : float
        Base delivery delay in virtual seconds. Default: 1.0.
    jitter_max : float
        Each delivery adds an independent uniform draw from [0, jitter_max).
        Default: 0.1; 0 disables jitter and consumes no draws.
    rad_t_max : float
        Upper bound of the random assessment delay. Must stay below
        hop_delay. Default: 0.5.
    protocol_seed : int
        Seed of every protocol-side random stream.
    """

    model_config = ConfigDict(frozen=True)

    hop_delay: float = Field(default=1.0, gt=0)
    jitter_max: float = Field(default=0.1, ge=0)
    rad_t_max: float = Field(default=0.5, ge=0)
    protocol_seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_rad_window(self) -> Self:
        if self.rad_t_max >= self.hop_delay:
            raise ValueError(  # noqa: TRY003
                f"rad_t_max ({self.rad_t_max}) must be smaller than"
                f" hop_delay ({self.hop_delay})"
            )
        return self


def _zeros(count: int) -> list[int]:
    return [0] * count


@dataclass
class TraceRecord:
    """Counters and timestamps of one phase.

    ``sent``/``received`` are per node id. The ``*_by_category`` tables split
    the same counts by packet category ("level_building", "level_back",
    "query", "data_back"); ``broadcasts_by_category`` counts only broadcast
    transmissions.
    """

    node_count: int
    t_start: float
    t_end: float
    sent: list[int]
    received: list[int]
    sent_by_category: dict[str, list[int]] = field(default_factory=dict)
    received_by_category: dict[str, list[int]] = field(default_factory=dict)
    broadcasts_by_category: dict[str, list[int]] = field(default_factory=dict)
    first_arrival_hops: dict[QueryKey, int] = field(default_factory=dict)
    marks: dict[str, float] = field(default_factory=dict)
    event_count: int = 0
    deliveries_scheduled: int = 0
    events: list[str] = field(default_factory=list)

    @classmethod
    def empty(cls, node_count: int, now: float) -> "TraceRecord":
        return cls(
            node_count=node_count,
            t_start=now,
            t_end=now,
            sent=_zeros(node_count),
            received=_zeros(node_count),
        )

    @property
    def total_sent(self) -> int:
        return sum(self.sent)

    @property
    def total_received(self) -> int:
        return sum(self.received)

    def load(self, node: int) -> int:
        """Sends plus receives of ``node`` in this phase."""
        return self.sent[node] + self.received[node]

    def sent_of(self, category: str) -> list[int]:
        return self.sent_by_category.get(category) or _zeros(self.node_count)

    def received_of(self, category: str) -> list[int]:
        return self.received_by_category.get(category) or _zeros(self.node_count)

    def broadcasts_of(self, category: str) -> list[int]:
        return self.broadcasts_by_category.get(category) or _zeros(self.node_count)

    def tally(self, table: dict[str, list[int]], category: str, node: int) -> None:
        counts = table.get(category)
        if counts is None:
            counts = table[category] = _zeros(self.node_count)
        counts[node] += 1


class PacketHandler(Protocol):
    """What a protocol must provide to receive engine callbacks."""

    def on_packet(self, node: int, sender: int, packet: SimPacket) -> None: ...

    def on_rad_expiry(self, node: int, key: QueryKey) -> None: ...


def _summarize(packet: SimPacket) -> str:
    if isinstance(packet, _WIRE_TYPES):
        return wire.describe(packet)
    return repr(packet)


class Simulator:
    """Virtual clock, event heap and delivery rules over one topology.

    Parameters
    ----------
    topology : Topology
        Who can hear whom. Deliveries outside it are contract violations.
    timing : TimingConfig, optional
        Delays and protocol seed. Defaults to ``TimingConfig()``.
    event_budget : int, optional
        Events one ``run_to_quiescence`` may process before aborting.
    trace_limit : int, optional
        Keep up to this many event-log lines per phase; 0 disables the log.
    """

    def __init__(
        self,
        topology: Topology,
        timing: TimingConfig | None = None,
        *,
        event_budget: int = DEFAULT_EVENT_BUDGET,
        trace_limit: int = 0,
    ) -> None:
        self.topology = topology
        self.timing = timing if timing is not None else TimingConfig()
        self.event_budget = event_budget
        self.trace_limit = trace_limit
        self.streams = RandomStreams(self.timing.protocol_seed)
        self.now = 0.0
        self._jitter = self.streams.stream("jitter")
        self._queue: list[tuple[float, int, EventKind, int, int, object]] = []
        self._sequence = itertools.count()
        self._handler: PacketHandler | None = None
        self._record = TraceRecord.empty(topology.node_count, self.now)

    def attach(self, handler: PacketHandler) -> None:
        """Route deliveries and timer expiries to ``handler``."""
        self._handler = handler

    @property
    def pending(self) -> int:
        """Number of scheduled, unprocessed events."""
        return len(self._queue)

    @property
    def record(self) -> TraceRecord:
        """Counters of the phase in progress."""
        return self._record

    def _push(
        self, delay: float, kind: EventKind, node: int, peer: int, payload: object
    ) -> None:
        heapq.heappush(
            self._queue,
            (self.now + delay, next(self._sequence), kind, node, peer, payload),
        )

    def _hop_delay(self) -> float:
        if self.timing.jitter_max > 0:
            return self.timing.hop_delay + self._jitter.uniform(self.timing.jitter_max)
        return self.timing.hop_delay

    def broadcast(
        self,
        sender: int,
        packet: SimPacket,
        recipients: Iterable[int] | None = None,
    ) -> None:
        """One transmission heard by ``recipients`` (all neighbors when None).

        Raises
        ------
        ContractViolationError
            If a recipient is not a neighbor of ``sender``.
        """
        neighbors = self.topology.adjacency[sender]
        targets = sorted(neighbors if recipients is None else recipients)
        stray = [node for node in targets if node not in neighbors]
        if stray:
            raise ContractViolationError(  # noqa: TRY003
                f"node {sender} cannot broadcast to non-neighbors {stray}"
            )
        record = self._record
        record.sent[sender] += 1
        record.tally(record.sent_by_category, packet.category, sender)
        record.tally(record.broadcasts_by_category, packet.category, sender)
        for receiver in targets:
            self._push(self._hop_delay(), EventKind.DELIVER, receiver, sender, packet)
        record.deliveries_scheduled += len(targets)

    def unicast(self, sender: int, receiver: int, packet: SimPacket) -> None:
        """One transmission addressed to a single neighbor.

        Raises
        ------
        ContractViolationError
            If ``receiver`` is ``sender`` or not its neighbor.
        """
        if receiver not in self.topology.adjacency[sender]:
            raise ContractViolationError(  # noqa: TRY003
                f"node {sender} cannot unicast to non-neighbor {receiver}"
            )
        record = self._record
        record.sent[sender] += 1
        record.tally(record.sent_by_category, packet.category, sender)
        self._push(self._hop_delay(), EventKind.DELIVER, receiver, sender, packet)
        record.deliveries_scheduled += 1

    def schedule_rad_expiry(self, node: int, delay: float, key: QueryKey) -> None:
        """Fire ``on_rad_expiry(node, key)`` after ``delay``."""
        self._push(delay, EventKind.RAD_EXPIRY, node, node, key)

    def mark(self, name: str) -> None:
        """Remember the current clock under ``name`` in this phase's record."""
        self._record.marks[name] = self.now

    def record_arrival(self, key: QueryKey, hops: int) -> None:
        """Note the hop count a query had when it first reached its target."""
        self._record.first_arrival_hops.setdefault(key, hops)

    def _require_handler(self) -> PacketHandler:
        if self._handler is None:
            raise RuntimeError("no packet handler attached")  # noqa: TRY003
        return self._handler

    def _log(self, kind: EventKind, node: int, peer: int, payload: object) -> None:
        record = self._record
        if len(record.events) >= self.trace_limit:
            return
        if kind is EventKind.DELIVER:
            detail = _summarize(cast("SimPacket", payload))
        else:
            detail = repr(payload)
        record.events.append(
            f"{self.now:.6f} {kind.name.lower()} {peer}->{node} {detail}"
        )

    def run_to_quiescence(self) -> TraceRecord:
        """Process events in (time, sequence) order until the heap is empty.

        Returns
        -------
        TraceRecord
            Everything counted since the previous call. A fresh record starts
            at the final clock.

        Raises
        ------
        EventBudgetExceededError
            If more than ``event_budget`` events would be processed.
        RuntimeError
            If events are pending and no handler is attached.
        """
        record = self._record
        queue = self._queue
        tracing = self.trace_limit > 0

        processed = 0
        while queue:
            if processed == self.event_budget:
                structlog.get_logger(__name__).error(
                    "event budget exhausted",
                    budget=self.event_budget,
                    clock=self.now,
                    pending=len(queue),
                )
                raise EventBudgetExceededError(self.event_budget, self.now)
            fire_time, _, kind, node, peer, payload = heapq.heappop(queue)
            self.now = fire_time
            processed += 1
            if tracing:
                self._log(kind, node, peer, payload)

            if kind is EventKind.DELIVER:
                packet = cast("SimPacket", payload)
                record.received[node] += 1
                record.tally(record.received_by_category, packet.category, node)
                self._require_handler().on_packet(node, peer, packet)
            else:
                self._require_handler().on_rad_expiry(node, cast("QueryKey", payload))

        record.event_count = processed
        record.t_end = self.now
        self._record = TraceRecord.empty(self.topology.node_count, self.now)
        return record
