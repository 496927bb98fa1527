"""Packet types exchanged between simulated nodes.

The four LBF packets have a wire form (see ``infrastructure.wire``). The two
flood packets only exist inside the simulator: the path a basic flood records
has no fixed width.

Every packet carries a ``category`` class attribute. The engine keys its
per-kind counters on it, so LBF and flooding share one accounting scheme:
both query packets count as "query" and both replies as "data_back".
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import ClassVar, Final, NamedTuple

__all__ = [
    "BROADCAST_TARGET",
    "DataBackPacket",
    "FloodQueryPacket",
    "FloodReplyPacket",
    "LevelBackPacket",
    "LevelBuildingPacket",
    "Packet",
    "PacketKind",
    "QueryKey",
    "QueryPacket",
    "SimPacket",
]

#: Target id that matches no node; marks a network-wide broadcast request.
BROADCAST_TARGET: Final = 0xFFFF


class PacketKind(IntEnum):
    """Leading byte of every encoded packet."""

    LEVEL_BUILDING = 1
    LEVEL_BACK = 2
    QUERY = 3
    DATA_BACK = 4


class QueryKey(NamedTuple):
    """Identity of one query flood: who started it and its sequence number."""

    source_id: int
    seq_num: int


@dataclass(frozen=True, slots=True)
class LevelBuildingPacket:
    """Carries the sender's level outward from the sink."""

    kind: ClassVar[PacketKind] = PacketKind.LEVEL_BUILDING
    category: ClassVar[str] = "level_building"

    level: int
    source_id: int
    seq_num: int


@dataclass(frozen=True, slots=True)
class LevelBackPacket:
    """Reports a node's newly assigned level to the sink."""

    kind: ClassVar[PacketKind] = PacketKind.LEVEL_BACK
    category: ClassVar[str] = "level_back"

    ttl: int
    level: int
    target_id: int
    source_id: int
    seq_num: int


@dataclass(frozen=True, slots=True)
class QueryPacket:
    """A TTL-scoped search for ``target_id`` started by ``source_id``."""

    kind: ClassVar[PacketKind] = PacketKind.QUERY
    category: ClassVar[str] = "query"

    hop_count: int
    ttl: int
    seq_num: int
    target_id: int
    source_id: int

    @property
    def key(self) -> QueryKey:
        return QueryKey(self.source_id, self.seq_num)


@dataclass(frozen=True, slots=True)
class DataBackPacket:
    """The target's answer, walking down the levels to the sink."""

    kind: ClassVar[PacketKind] = PacketKind.DATA_BACK
    category: ClassVar[str] = "data_back"

    ttl: int
    seq_num: int
    target_id: int
    source_id: int
    data: bytes = b""

    @property
    def data_len(self) -> int:
        return len(self.data)


@dataclass(frozen=True, slots=True)
class FloodQueryPacket:
    """Basic-flooding query that records the path it travelled.

    ``path`` holds the forwarding nodes after the source, so
    ``len(path) == hop_count``.
    """

    category: ClassVar[str] = "query"

    hop_count: int
    ttl: int
    seq_num: int
    target_id: int
    source_id: int
    path: tuple[int, ...] = ()

    @property
    def key(self) -> QueryKey:
        return QueryKey(self.source_id, self.seq_num)


@dataclass(frozen=True, slots=True)
class FloodReplyPacket:
    """Reply retracing a flood path; ``route`` lists the hops still to take."""

    category: ClassVar[str] = "data_back"

    route: tuple[int, ...]
    seq_num: int
    source_id: int
    target_id: int
    data: bytes = b""


Packet = LevelBuildingPacket | LevelBackPacket | QueryPacket | DataBackPacket
SimPacket = Packet | FloodQueryPacket | FloodReplyPacket
