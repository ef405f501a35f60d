"""Hierarchical seeded random streams.

Every source of randomness in the simulator is an explicit ``RngStream``
addressed by a path of the form (master seed, stage, epoch, group, client,
purpose tag).  Identical paths reproduce identical draw sequences, distinct
paths are statistically independent, so serial and parallel executions of
the same run consume exactly the same random numbers.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

_U32 = 2**32


def _encode_part(part: int | str) -> int:
    """Map a path component to a uint32 word for SeedSequence spawn keys."""
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        value = int(part)
        if not 0 <= value < _U32:
            raise ValueError(f"integer path component out of range: {value}")
        return value
    raise TypeError(f"rng path components must be int or str, got {type(part).__name__}")


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream addressed by (master seed, path).

    ``child(...)`` extends the path; ``generator()`` materializes a fresh
    numpy Generator whose state depends only on the full path.  Calling
    ``generator()`` twice on the same stream yields identical sequences.
    """

    master: int
    path: tuple[int, ...] = ()

    def child(self, *parts: int | str) -> RngStream:
        return RngStream(self.master, self.path + tuple(_encode_part(p) for p in parts))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.master, spawn_key=self.path))
