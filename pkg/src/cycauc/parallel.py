"""Client execution strategies for one round.

A mapper runs one pure function per selected client and returns results
keyed by client id.  Because each client's work depends only on the round's
immutable snapshot and its own rng stream, and because the engines always
reduce results in ascending client id, every mapper yields bit-identical
training trajectories.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")

ClientMapper = Callable[[Callable[[int], T], Iterable[int]], dict[int, T]]


def serial_map(fn: Callable[[int], T], client_ids: Iterable[int]) -> dict[int, T]:
    return {cid: fn(cid) for cid in client_ids}


def thread_map(fn: Callable[[int], T], client_ids: Iterable[int]) -> dict[int, T]:
    ids = list(client_ids)
    with ThreadPoolExecutor(max_workers=max(1, len(ids))) as pool:
        results = list(pool.map(fn, ids))
    return dict(zip(ids, results))
