"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
tuple of integers, so a stream is addressable by (master seed, batch id,
block index) and never depends on the order in which other streams were
consumed. Rows are generated in fixed-size blocks; row ``i`` of a batch is a
function of ``(seed, batch_id, i // BLOCK_ROWS)`` only.
"""

from __future__ import annotations

import numpy as np

BLOCK_ROWS = 1 << 14
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, *path: int) -> int:
    """Fold a path of non-negative integers into a child seed."""
    h = splitmix64(master_seed & _MASK64)
    for p in path:
        h = splitmix64(h ^ (p & _MASK64))
    return h


def stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator addressed by ``(seed, *key)``."""
    ss = np.random.SeedSequence([seed & _MASK64, *[k & _MASK64 for k in key]])
    return np.random.Generator(np.random.Philox(ss))


def block_ranges(m: int, block: int = BLOCK_ROWS):
    """Yield ``(block_index, start, stop)`` covering ``range(m)``."""
    for b, start in enumerate(range(0, m, block)):
        yield b, start, min(start + block, m)
