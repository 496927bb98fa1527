"""Independent, named random substreams derived from one protocol seed.

Each concern (delivery jitter, RAD timers, reply routing, unicast choice,
payload bytes) draws from its own PCG64 stream spawned from
``SeedSequence(protocol_seed, spawn_key=(index,))``. Adding draws to one
concern never shifts another's sequence.
"""

from collections.abc import Sequence
from typing import Final, TypeVar

import numpy as np

__all__ = ["ALGORITHM", "STREAM_NAMES", "RandomStream", "RandomStreams"]

ALGORITHM: Final = "PCG64"

#: Stream name -> spawn index. Order is part of the reproducibility contract.
STREAM_NAMES: Final = ("jitter", "rad", "routing", "unicast", "payload")

T = TypeVar("T")


class RandomStream:
    """Buffered uniform draws from one generator.

    Values are taken from blocks of ``Generator.random(BLOCK_SIZE)`` so the
    sequence a caller sees depends only on how many draws came before it.
    """

    BLOCK_SIZE: Final = 1024

    def __init__(self, generator: np.random.Generator) -> None:
        self._generator = generator
        self._block = generator.random(self.BLOCK_SIZE)
        self._index = 0

    def random(self) -> float:
        """Next float in [0, 1)."""
        if self._index == self.BLOCK_SIZE:
            self._block = self._generator.random(self.BLOCK_SIZE)
            self._index = 0
        value = float(self._block[self._index])
        self._index += 1
        return value

    def uniform(self, high: float) -> float:
        """Float in [0, high)."""
        return self.random() * high

    def choice(self, candidates: Sequence[T]) -> T:
        """Pick one of ``candidates`` uniformly; callers pass a sorted sequence.

        Raises
        ------
        ValueError
            If ``candidates`` is empty.
        """
        count = len(candidates)
        if count == 0:
            raise ValueError("cannot choose from an empty sequence")  # noqa: TRY003
        return candidates[min(int(self.random() * count), count - 1)]

    def token_bytes(self, length: int) -> bytes:
        """``length`` bytes, one uniform draw per byte."""
        return bytes(int(self.random() * 256) for _ in range(length))


class RandomStreams:
    """The full set of named streams for one protocol seed."""

    def __init__(self, protocol_seed: int) -> None:
        self.protocol_seed = protocol_seed
        self._streams = {
            name: RandomStream(
                np.random.Generator(
                    np.random.PCG64(
                        np.random.SeedSequence(protocol_seed, spawn_key=(index,))
                    )
                )
            )
            for index, name in enumerate(STREAM_NAMES)
        }

    def stream(self, name: str) -> RandomStream:
        """Return the stream called ``name``.

        Raises
        ------
        KeyError
            If ``name`` is not one of STREAM_NAMES.
        """
        return self._streams[name]

    def __repr__(self) -> str:
        return (
            f"RandomStreams(protocol_seed={self.protocol_seed},"
            f" algorithm={ALGORITHM})"
        )
