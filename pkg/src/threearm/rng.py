"""Partition-independent random streams.

Replications are grouped into fixed-size blocks; block ``b`` of a run with
seed ``s`` draws from a Philox generator keyed by ``(s, b)``. Rep ``i`` is
therefore a function of ``(seed, i)`` alone, whatever the number of workers
or the order in which blocks are evaluated.
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 8192
_MASK64 = (1 << 64) - 1


def block_generator(seed: int, block: int) -> np.random.Generator:
    key = (int(seed) & _MASK64) | ((int(block) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def block_ranges(reps: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(reps)``."""
    for b, start in enumerate(range(0, reps, block_size)):
        yield b, start, min(start + block_size, reps)


def standard_normals(seed: int, block: int, count: int, dim: int = 3) -> np.ndarray:
    """``count`` rows of ``dim`` iid standard normals for one block."""
    return block_generator(seed, block).standard_normal((count, dim))
