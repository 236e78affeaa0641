"""Counter-based random streams.

Shot ``i`` of a run always draws from the Philox stream keyed by
``(seed, purpose, i // BLOCK)``, so results do not depend on how blocks are
distributed over threads.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK = 4096
T = TypeVar("T")


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, index)``."""
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    ss = np.random.SeedSequence([int(seed), _purpose_key(purpose), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def blocks(total: int, block: int = BLOCK) -> list[tuple[int, int]]:
    """``(start, stop)`` ranges covering ``range(total)``."""
    return [(s, min(s + block, total)) for s in range(0, total, block)]


def map_blocks(
    fn: Callable[[np.random.Generator, int], T],
    total: int,
    seed: int,
    purpose: str,
    workers: int = 1,
) -> list[T]:
    """Evaluate ``fn(rng, size)`` for every block, in block order.

    ``workers > 1`` runs blocks on a thread pool; the output is the same.
    """
    jobs = [(stream(seed, purpose, b), stop - start) for b, (start, stop) in enumerate(blocks(total))]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def fresh_seed() -> int:
    """A random 63-bit seed, for callers that did not supply one."""
    return int(np.random.SeedSequence().entropy % (2**63))
