"""Level-Based Flooding: level building, level reports, query search, data return.

The protocol object is the engine's packet handler. It owns one ``NodeState``
per node (the sink included, at level 0) and a ``SinkState`` holding what the
sink learns.

Phases, each driven to quiescence by the caller:

1. ``start_level_building`` floods LevelBuilding packets outward. A node that
   learns a smaller level adopts it, rebroadcasts, and sends a LevelBack
   report down toward the sink.
2. ``start_query(target)`` broadcasts a Query whose TTL is the target's level.
   Receivers wait a random assessment delay (RAD) counting duplicates, then
   rebroadcast to higher-level neighbors, unicast to one unheard neighbor, or
   drop, depending on ``p = c / q`` against the threshold P.
3. The target answers with a DataBack that walks down one level per hop.

``start_broadcast`` runs a query that matches no node, scoped to the deepest
known level; it measures dissemination quality.
"""

from dataclasses import dataclass, field, replace
from typing import Final

import structlog

from level_flood.application.exceptions import InvalidQueryError
from level_flood.domain.packets import (
    BROADCAST_TARGET,
    DataBackPacket,
    LevelBackPacket,
    LevelBuildingPacket,
    QueryKey,
    QueryPacket,
    SimPacket,
)
from level_flood.domain.topology import Topology
from level_flood.infrastructure.engine import Simulator

__all__ = [
    "SENTINEL_LEVEL",
    "LevelFloodProtocol",
    "NodeState",
    "QueryOutcome",
    "RadState",
    "SinkState",
]

#: Level of a node that has not heard a LevelBuilding packet yet.
SENTINEL_LEVEL: Final = 255

_SEQ_MODULUS: Final = 1 << 16


@dataclass(slots=True)
class RadState:
    """Duplicate counting for one pending query at one node."""

    c: int
    q: int
    deadline: float
    cached_packet: QueryPacket

    @property
    def p(self) -> float:
        """Fraction of neighbors known to have processed the query."""
        return self.c / self.q if self.q else 1.0


@dataclass(slots=True)
class NodeState:
    """Per-node protocol state.

    ``neighbor_levels`` keeps the smallest level each neighbor has advertised;
    the three neighbor sets are recomputed from it whenever either side's
    level changes, so they always agree with current levels.
    """

    my_id: int
    degree: int
    level: int = SENTINEL_LEVEL
    low_neighbors: set[int] = field(default_factory=set)
    equal_neighbors: set[int] = field(default_factory=set)
    high_neighbors: set[int] = field(default_factory=set)
    neighbor_levels: dict[int, int] = field(default_factory=dict)
    processed_queries: set[QueryKey] = field(default_factory=set)
    pending_rad: dict[QueryKey, RadState] = field(default_factory=dict)
    heard_from: dict[QueryKey, set[int]] = field(default_factory=dict)
    next_seq: int = 0

    def _place(self, neighbor: int, level: int) -> None:
        self.low_neighbors.discard(neighbor)
        self.equal_neighbors.discard(neighbor)
        self.high_neighbors.discard(neighbor)
        if level < self.level:
            self.low_neighbors.add(neighbor)
        elif level == self.level:
            self.equal_neighbors.add(neighbor)
        else:
            self.high_neighbors.add(neighbor)

    def record_neighbor(self, neighbor: int, level: int) -> None:
        """Remember ``neighbor`` advertised ``level``, keeping the minimum."""
        known = self.neighbor_levels.get(neighbor)
        if known is not None and known <= level:
            return
        self.neighbor_levels[neighbor] = level
        self._place(neighbor, level)

    def set_level(self, level: int) -> None:
        """Adopt ``level`` and re-sort every known neighbor against it."""
        self.level = level
        for neighbor, advertised in self.neighbor_levels.items():
            self._place(neighbor, advertised)

    def allocate_seq(self) -> int:
        seq = self.next_seq
        self.next_seq = (seq + 1) % _SEQ_MODULUS
        return seq

    def reset_query_state(self) -> None:
        """Forget per-query state so sequence numbers can be reused."""
        self.processed_queries.clear()
        self.pending_rad.clear()
        self.heard_from.clear()


@dataclass(slots=True)
class QueryOutcome:
    """Sink-side bookkeeping for one query."""

    seq_num: int
    target_id: int
    issue_time: float
    ttl: int
    fallback: bool = False
    success: bool = False
    hops: int | None = None


@dataclass(slots=True)
class SinkState:
    """What the sink knows: the level table and its queries."""

    sink_id: int
    level_table: dict[int, int] = field(default_factory=dict)
    outstanding_queries: dict[int, QueryOutcome] = field(default_factory=dict)
    completed_queries: dict[int, QueryOutcome] = field(default_factory=dict)
    next_seq: int = 0

    @property
    def level(self) -> int:
        return 0

    @property
    def max_known_level(self) -> int:
        return max(self.level_table.values(), default=0)

    def allocate_seq(self) -> int:
        seq = self.next_seq
        self.next_seq = (seq + 1) % _SEQ_MODULUS
        return seq

    def record_level(self, node: int, level: int) -> None:
        """Store a reported level; a lower report supersedes a higher one."""
        known = self.level_table.get(node)
        if known is None or level < known:
            self.level_table[node] = level


class LevelFloodProtocol:
    """Level-Based Flooding over one simulator.

    Parameters
    ----------
    topology : Topology
        The deployment; ``topology.sink_id`` is the sink.
    simulator : Simulator
        Engine to send through; this object attaches itself as its handler.
    threshold : float
        P in [0, 1]. A node whose ``p >= P`` unicasts instead of rebroadcasting.
    payload_bytes : int, optional
        Length of the data a target returns. Default: 4.
    """

    def __init__(
        self,
        topology: Topology,
        simulator: Simulator,
        *,
        threshold: float,
        payload_bytes: int = 4,
    ) -> None:
        if not 0 <= threshold <= 1:
            raise ValueError(  # noqa: TRY003
                f"threshold {threshold} must lie in [0, 1]"
            )
        self.topology = topology
        self.simulator = simulator
        self.threshold = threshold
        self.payload_bytes = payload_bytes
        self.sink_id = topology.sink_id
        self.nodes = [
            NodeState(my_id=node, degree=topology.degree(node))
            for node in range(topology.node_count)
        ]
        self.nodes[self.sink_id].level = 0
        self.sink = SinkState(sink_id=self.sink_id)
        self.reply_failures = 0
        self.data_failures = 0
        self.unknown_level_fallbacks = 0
        self.processed_counts: dict[QueryKey, int] = {}

        self._rad = simulator.streams.stream("rad")
        self._routing = simulator.streams.stream("routing")
        self._unicast = simulator.streams.stream("unicast")
        self._payload = simulator.streams.stream("payload")
        simulator.attach(self)

    # ------------------------------------------------------------------
    # Engine callbacks
    # ------------------------------------------------------------------
    def on_packet(self, node: int, sender: int, packet: SimPacket) -> None:
        match packet:
            case LevelBuildingPacket():
                self.handle_level_building(node, packet, sender)
            case LevelBackPacket():
                self.handle_level_back(node, packet)
            case QueryPacket():
                self.handle_query(node, packet, sender)
            case DataBackPacket():
                self.handle_data_back(node, packet)
            case _:
                raise TypeError(f"LBF cannot handle {packet!r}")  # noqa: TRY003

    def on_rad_expiry(self, node: int, key: QueryKey) -> None:
        """Decide what to do with a query once its assessment delay ends.

        Forwarded copies carry the receiver-side hop count cached when the RAD
        started. A copy that reaches an equal-level neighbor arrives one hop
        past its level and is dropped there, so the unicast branch only falls
        back to an equal-level neighbor when that neighbor is the target.
        """
        state = self.nodes[node]
        rad = state.pending_rad.pop(key)
        heard = state.heard_from.pop(key, set())
        state.processed_queries.add(key)
        self._count_processed(key)

        if rad.c >= rad.q:
            return
        if rad.p >= self.threshold:
            candidates = sorted(state.high_neighbors - heard)
            target = rad.cached_packet.target_id
            if not candidates and target in state.equal_neighbors - heard:
                candidates = [target]
            if candidates:
                self.simulator.unicast(
                    node, self._unicast.choice(candidates), rad.cached_packet
                )
            return
        if state.high_neighbors:
            self.simulator.broadcast(node, rad.cached_packet, state.high_neighbors)

    # ------------------------------------------------------------------
    # Level building and level reports
    # ------------------------------------------------------------------
    def start_level_building(self) -> None:
        """Broadcast level 0 from the sink to all its neighbors."""
        packet = LevelBuildingPacket(
            level=0, source_id=self.sink_id, seq_num=self.sink.allocate_seq()
        )
        self.simulator.broadcast(self.sink_id, packet)

    def handle_level_building(
        self, node: int, packet: LevelBuildingPacket, sender: int
    ) -> None:
        state = self.nodes[node]
        state.record_neighbor(sender, packet.level)
        candidate = packet.level + 1
        if candidate >= state.level:
            return
        state.set_level(candidate)
        self.simulator.mark("level_assigned")
        self._report_level(state)
        self.simulator.broadcast(node, replace(packet, level=candidate))

    def _report_level(self, state: NodeState) -> None:
        reply = LevelBackPacket(
            ttl=state.level,
            level=state.level,
            target_id=self.sink_id,
            source_id=state.my_id,
            seq_num=state.allocate_seq(),
        )
        if not self._forward_down(state, reply):
            self.reply_failures += 1

    def handle_level_back(self, node: int, packet: LevelBackPacket) -> None:
        if node == self.sink_id:
            self.sink.record_level(packet.source_id, packet.level)
            return
        ttl = packet.ttl - 1
        forwarded = ttl > 0 and self._forward_down(
            self.nodes[node], replace(packet, ttl=ttl)
        )
        if not forwarded:
            self.reply_failures += 1
            structlog.get_logger(__name__).debug(
                "level report dropped", node=node, source=packet.source_id, ttl=ttl
            )

    def _forward_down(
        self, state: NodeState, packet: LevelBackPacket | DataBackPacket
    ) -> bool:
        if not state.low_neighbors:
            return False
        next_hop = self._routing.choice(sorted(state.low_neighbors))
        self.simulator.unicast(state.my_id, next_hop, packet)
        return True

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------
    def start_query(self, target: int) -> int:
        """Search for ``target``; returns the query's sequence number.

        Raises
        ------
        InvalidQueryError
            If ``target`` is the sink or not a node of the topology.
        """
        if target == self.sink_id:
            raise InvalidQueryError("the sink cannot query itself")  # noqa: TRY003
        if not 0 <= target < self.topology.node_count:
            raise InvalidQueryError(  # noqa: TRY003
                f"no node {target} in this topology"
            )

        level = self.sink.level_table.get(target)
        fallback = level is None
        ttl = self.sink.max_known_level if level is None else level
        if fallback:
            self.unknown_level_fallbacks += 1
            structlog.get_logger(__name__).debug(
                "unknown target level", target=target, ttl=ttl
            )

        seq = self._issue(target, ttl)
        self.sink.outstanding_queries[seq] = QueryOutcome(
            seq_num=seq,
            target_id=target,
            issue_time=self.simulator.now,
            ttl=ttl,
            fallback=fallback,
        )
        return seq

    def start_broadcast(self) -> int:
        """Disseminate a query that matches no node down to the deepest level."""
        return self._issue(BROADCAST_TARGET, self.sink.max_known_level)

    def _issue(self, target: int, ttl: int) -> int:
        seq = self.sink.allocate_seq()
        key = QueryKey(self.sink_id, seq)
        self.nodes[self.sink_id].processed_queries.add(key)
        self._count_processed(key)
        if ttl > 0:
            packet = QueryPacket(
                hop_count=0,
                ttl=ttl,
                seq_num=seq,
                target_id=target,
                source_id=self.sink_id,
            )
            self.simulator.broadcast(self.sink_id, packet)
        return seq

    def handle_query(self, node: int, packet: QueryPacket, sender: int) -> None:
        """Process one received query copy.

        Order: target check, duplicate counting for a pending RAD, then the
        processed, level and TTL drops, then a new RAD.
        """
        state = self.nodes[node]
        key = packet.key
        hop = packet.hop_count + 1

        if node == packet.target_id:
            if key not in state.processed_queries:
                state.processed_queries.add(key)
                self._count_processed(key)
                self.simulator.record_arrival(key, hop)
                self.send_data_back(state, replace(packet, hop_count=hop))
            return

        rad = state.pending_rad.get(key)
        if rad is not None:
            heard = state.heard_from[key]
            if sender not in heard:
                heard.add(sender)
                rad.c += 1
            return

        if key in state.processed_queries or hop > state.level or hop >= packet.ttl:
            return

        delay = self._rad.uniform(self.simulator.timing.rad_t_max)
        state.heard_from[key] = {sender}
        # the first copy is not a duplicate
        state.pending_rad[key] = RadState(
            c=0,
            q=state.degree,
            deadline=self.simulator.now + delay,
            cached_packet=replace(packet, hop_count=hop),
        )
        self.simulator.schedule_rad_expiry(node, delay, key)

    # ------------------------------------------------------------------
    # Data return
    # ------------------------------------------------------------------
    def send_data_back(self, state: NodeState, query: QueryPacket) -> None:
        """Answer ``query`` from its target, one level down per hop."""
        reply = DataBackPacket(
            ttl=state.level,
            seq_num=query.seq_num,
            target_id=query.source_id,
            source_id=state.my_id,
            data=self._payload.token_bytes(self.payload_bytes),
        )
        if not self._forward_down(state, reply):
            self.data_failures += 1

    def handle_data_back(self, node: int, packet: DataBackPacket) -> None:
        if node == self.sink_id:
            self._close_query(packet)
            return
        ttl = packet.ttl - 1
        forwarded = ttl > 0 and self._forward_down(
            self.nodes[node], replace(packet, ttl=ttl)
        )
        if not forwarded:
            self.data_failures += 1
            structlog.get_logger(__name__).debug(
                "data dropped", node=node, source=packet.source_id, ttl=ttl
            )

    def _close_query(self, packet: DataBackPacket) -> None:
        outcome = self.sink.outstanding_queries.get(packet.seq_num)
        if outcome is None or outcome.target_id != packet.source_id:
            return
        del self.sink.outstanding_queries[packet.seq_num]
        outcome.success = True
        outcome.hops = self.simulator.record.first_arrival_hops.get(
            QueryKey(self.sink_id, packet.seq_num)
        )
        self.sink.completed_queries[packet.seq_num] = outcome

    # ------------------------------------------------------------------
    # Bookkeeping
    # ------------------------------------------------------------------
    def _count_processed(self, key: QueryKey) -> None:
        self.processed_counts[key] = self.processed_counts.get(key, 0) + 1

    def outcome(self, seq: int) -> QueryOutcome:
        """Completed or still-outstanding record of query ``seq``."""
        done = self.sink.completed_queries.get(seq)
        if done is not None:
            return done
        return self.sink.outstanding_queries[seq]

    @property
    def levels(self) -> list[int | None]:
        """Each node's level, ``None`` where none was assigned."""
        return [
            None if state.level == SENTINEL_LEVEL else state.level
            for state in self.nodes
        ]

    def reset_query_state(self) -> None:
        """Clear per-query state on every node and the sink's query tables."""
        for state in self.nodes:
            state.reset_query_state()
        self.sink.outstanding_queries.clear()
        self.sink.completed_queries.clear()
        self.processed_counts.clear()
