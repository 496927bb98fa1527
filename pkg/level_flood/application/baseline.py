"""Basic flooding with path recording and reverse-path replies.

Every node rebroadcasts a query to all neighbors the first time it hears it,
as long as the received hop count is below the TTL. The packet records the
path it took; the target answers along that path reversed and keeps the flood
going like any other node.
"""

from dataclasses import dataclass, field
from typing import Final

from level_flood.application.exceptions import InvalidQueryError
from level_flood.application.lbf import QueryOutcome
from level_flood.domain.packets import (
    BROADCAST_TARGET,
    FloodQueryPacket,
    FloodReplyPacket,
    QueryKey,
    SimPacket,
)
from level_flood.domain.topology import Topology
from level_flood.infrastructure.engine import Simulator

__all__ = ["FloodProtocol", "FloodState"]

_SEQ_MODULUS: Final = 1 << 16


@dataclass(slots=True)
class FloodState:
    """Queries one node has already rebroadcast."""

    processed: set[QueryKey] = field(default_factory=set)


class FloodProtocol:
    """Basic flooding over one simulator.

    A receiver rebroadcasts while the copy's hop count is below the TTL and
    the sink sends hop 0, so a flood with ``ttl=k`` reaches nodes ``k + 1``
    hops out. An LBF query with ``ttl=k`` stops at level ``k``. Flood TTLs are
    therefore not interchangeable with LBF query TTLs.

    Parameters
    ----------
    topology : Topology
        The deployment; ``topology.sink_id`` originates every query.
    simulator : Simulator
        Engine to send through; this object attaches itself as its handler.
    payload_bytes : int, optional
        Length of the data a target returns. Default: 4.
    """

    def __init__(
        self, topology: Topology, simulator: Simulator, *, payload_bytes: int = 4
    ) -> None:
        self.topology = topology
        self.simulator = simulator
        self.payload_bytes = payload_bytes
        self.sink_id = topology.sink_id
        self.states = [FloodState() for _ in range(topology.node_count)]
        self.outstanding: dict[int, QueryOutcome] = {}
        self.completed: dict[int, QueryOutcome] = {}
        self.processed_counts: dict[QueryKey, int] = {}
        self.reply_failures = 0
        self._next_seq = 0
        self._payload = simulator.streams.stream("payload")
        simulator.attach(self)

    def on_packet(self, node: int, sender: int, packet: SimPacket) -> None:
        match packet:
            case FloodQueryPacket():
                self.handle_flood_packet(node, packet, sender)
            case FloodReplyPacket():
                self.handle_flood_reply(node, packet)
            case _:
                raise TypeError(f"flooding cannot handle {packet!r}")  # noqa: TRY003

    def on_rad_expiry(self, node: int, key: QueryKey) -> None:
        raise TypeError(  # noqa: TRY003
            f"flooding schedules no assessment delays (node {node}, {key})"
        )

    def flood_query(self, target: int, ttl: int) -> int:
        """Flood a search for ``target`` to ``ttl + 1`` hops out; returns its seq.

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
        seq = self._issue(target, ttl)
        self.outstanding[seq] = QueryOutcome(
            seq_num=seq, target_id=target, issue_time=self.simulator.now, ttl=ttl
        )
        return seq

    def flood_broadcast(self, ttl: int) -> int:
        """Flood a query that matches no node."""
        return self._issue(BROADCAST_TARGET, ttl)

    def _issue(self, target: int, ttl: int) -> int:
        seq = self._next_seq
        self._next_seq = (seq + 1) % _SEQ_MODULUS
        key = QueryKey(self.sink_id, seq)
        self.states[self.sink_id].processed.add(key)
        self._count_processed(key)
        if ttl >= 1:
            packet = FloodQueryPacket(
                hop_count=0,
                ttl=ttl,
                seq_num=seq,
                target_id=target,
                source_id=self.sink_id,
            )
            self.simulator.broadcast(self.sink_id, packet)
        return seq

    def handle_flood_packet(
        self, node: int, packet: FloodQueryPacket, sender: int
    ) -> None:
        state = self.states[node]
        key = packet.key
        if key in state.processed:
            return
        state.processed.add(key)
        self._count_processed(key)

        if node == packet.target_id:
            self.simulator.record_arrival(key, packet.hop_count + 1)
            route = (*reversed(packet.path), self.sink_id)
            reply = FloodReplyPacket(
                route=route[1:],
                seq_num=packet.seq_num,
                source_id=node,
                target_id=packet.source_id,
                data=self._payload.token_bytes(self.payload_bytes),
            )
            self.simulator.unicast(node, route[0], reply)

        if packet.hop_count < packet.ttl:
            forward = FloodQueryPacket(
                hop_count=packet.hop_count + 1,
                ttl=packet.ttl,
                seq_num=packet.seq_num,
                target_id=packet.target_id,
                source_id=packet.source_id,
                path=(*packet.path, node),
            )
            self.simulator.broadcast(node, forward)

    def handle_flood_reply(self, node: int, packet: FloodReplyPacket) -> None:
        if node == self.sink_id:
            outcome = self.outstanding.pop(packet.seq_num, None)
            if outcome is None or outcome.target_id != packet.source_id:
                return
            outcome.success = True
            outcome.hops = self.simulator.record.first_arrival_hops.get(
                QueryKey(self.sink_id, packet.seq_num)
            )
            self.completed[packet.seq_num] = outcome
            return
        if not packet.route:
            self.reply_failures += 1
            return
        self.simulator.unicast(
            node,
            packet.route[0],
            FloodReplyPacket(
                route=packet.route[1:],
                seq_num=packet.seq_num,
                source_id=packet.source_id,
                target_id=packet.target_id,
                data=packet.data,
            ),
        )

    def _count_processed(self, key: QueryKey) -> None:
        self.processed_counts[key] = self.processed_counts.get(key, 0) + 1

    def outcome(self, seq: int) -> QueryOutcome:
        """Completed or still-outstanding record of query ``seq``."""
        done = self.completed.get(seq)
        if done is not None:
            return done
        return self.outstanding[seq]

    def reset_query_state(self) -> None:
        """Clear every node's processed set and the sink's query tables."""
        for state in self.states:
            state.processed.clear()
        self.outstanding.clear()
        self.completed.clear()
        self.processed_counts.clear()
