"""Big-endian wire codec for the four LBF packet formats.

Layouts, one 32-bit row per line:

    LevelBuilding (6 bytes)   kind | level | source_id(16)
                              seq_num(16)
    LevelBack (10 bytes)      kind | 0 | ttl | level
                              seq_num(16) | target_id(16)
                              source_id(16)
    Query (10 bytes)          kind | 0 | hop_count | ttl
                              seq_num(16) | target_id(16)
                              source_id(16)
    DataBack (10 + n bytes)   kind | 0 | ttl | data_len
                              seq_num(16) | target_id(16)
                              source_id(16) | data...

``decode`` accepts exactly the byte strings ``encode`` can produce.
"""

import struct
from typing import Final

from level_flood.application.exceptions import (
    FieldOverflowError,
    PacketLengthMismatchError,
    TruncatedPacketError,
    UnknownPacketKindError,
    WireError,
)
from level_flood.domain.packets import (
    DataBackPacket,
    LevelBackPacket,
    LevelBuildingPacket,
    Packet,
    PacketKind,
    QueryPacket,
)

__all__ = ["decode", "describe", "encode", "hexdump"]

_LEVEL_BUILDING: Final = struct.Struct(">BBHH")
_TEN_BYTE_HEADER: Final = struct.Struct(">BxBBHHH")

_U8: Final = 0xFF
_U16: Final = 0xFFFF


def _check(name: str, value: int, limit: int) -> None:
    if not 0 <= value <= limit:
        raise FieldOverflowError(  # noqa: TRY003
            f"{name}={value} does not fit in {limit.bit_length()} bits"
        )


def encode(packet: Packet) -> bytes:
    """Pack ``packet`` into its wire form.

    Raises
    ------
    FieldOverflowError
        If a field exceeds its declared width.
    """
    match packet:
        case LevelBuildingPacket(level=level, source_id=source, seq_num=seq):
            _check("level", level, _U8)
            _check("source_id", source, _U16)
            _check("seq_num", seq, _U16)
            return _LEVEL_BUILDING.pack(packet.kind, level, source, seq)
        case LevelBackPacket():
            _check("ttl", packet.ttl, _U8)
            _check("level", packet.level, _U8)
            _check("seq_num", packet.seq_num, _U16)
            _check("target_id", packet.target_id, _U16)
            _check("source_id", packet.source_id, _U16)
            return _TEN_BYTE_HEADER.pack(
                packet.kind,
                packet.ttl,
                packet.level,
                packet.seq_num,
                packet.target_id,
                packet.source_id,
            )
        case QueryPacket():
            _check("hop_count", packet.hop_count, _U8)
            _check("ttl", packet.ttl, _U8)
            _check("seq_num", packet.seq_num, _U16)
            _check("target_id", packet.target_id, _U16)
            _check("source_id", packet.source_id, _U16)
            return _TEN_BYTE_HEADER.pack(
                packet.kind,
                packet.hop_count,
                packet.ttl,
                packet.seq_num,
                packet.target_id,
                packet.source_id,
            )
        case DataBackPacket():
            _check("ttl", packet.ttl, _U8)
            _check("data_len", packet.data_len, _U8)
            _check("seq_num", packet.seq_num, _U16)
            _check("target_id", packet.target_id, _U16)
            _check("source_id", packet.source_id, _U16)
            header = _TEN_BYTE_HEADER.pack(
                packet.kind,
                packet.ttl,
                packet.data_len,
                packet.seq_num,
                packet.target_id,
                packet.source_id,
            )
            return header + bytes(packet.data)
    raise TypeError(f"not a wire packet: {packet!r}")  # noqa: TRY003


def decode(data: bytes) -> Packet:
    """Unpack one packet.

    Raises
    ------
    UnknownPacketKindError
        If the first byte is not a known kind.
    TruncatedPacketError
        If the input is shorter than its kind's header.
    PacketLengthMismatchError
        If the input length disagrees with the declared layout.
    WireError
        If the pad byte is not zero.
    """
    if not data:
        raise TruncatedPacketError("empty input")  # noqa: TRY003
    try:
        kind = PacketKind(data[0])
    except ValueError:
        raise UnknownPacketKindError(  # noqa: TRY003
            f"unknown packet kind 0x{data[0]:02x}"
        ) from None

    header = _LEVEL_BUILDING if kind is PacketKind.LEVEL_BUILDING else _TEN_BYTE_HEADER
    if len(data) < header.size:
        raise TruncatedPacketError(  # noqa: TRY003
            f"{kind.name} needs {header.size} header bytes, got {len(data)}"
        )

    if kind is PacketKind.LEVEL_BUILDING:
        _expect_length(kind, data, header.size)
        _, level, source, seq = _LEVEL_BUILDING.unpack(data)
        return LevelBuildingPacket(level=level, source_id=source, seq_num=seq)

    if data[1] != 0:
        raise WireError(  # noqa: TRY003
            f"{kind.name} pad byte is 0x{data[1]:02x}, not 0"
        )
    _, first, second, seq, target, source = _TEN_BYTE_HEADER.unpack_from(data)

    if kind is PacketKind.LEVEL_BACK:
        _expect_length(kind, data, header.size)
        return LevelBackPacket(
            ttl=first, level=second, target_id=target, source_id=source, seq_num=seq
        )
    if kind is PacketKind.QUERY:
        _expect_length(kind, data, header.size)
        return QueryPacket(
            hop_count=first, ttl=second, seq_num=seq, target_id=target, source_id=source
        )

    _expect_length(kind, data, header.size + second)
    return DataBackPacket(
        ttl=first,
        seq_num=seq,
        target_id=target,
        source_id=source,
        data=bytes(data[header.size :]),
    )


def _expect_length(kind: PacketKind, data: bytes, expected: int) -> None:
    if len(data) != expected:
        raise PacketLengthMismatchError(  # noqa: TRY003
            f"{kind.name} should be {expected} bytes, got {len(data)}"
        )


def hexdump(data: bytes) -> str:
    """Hex bytes grouped in 32-bit rows, e.g. ``03000202 00070005 0000``."""
    raw = data.hex()
    return " ".join(raw[i : i + 8] for i in range(0, len(raw), 8))


def describe(packet: Packet) -> str:
    """One-line summary: kind name, hex dump and fields."""
    return f"{packet.kind.name} [{hexdump(encode(packet))}] {packet!r}"
