"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, stream_id)`` with its
counter starting at zero, so any partition of the work into batches draws
exactly the same numbers as a single sequential run.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "stream_id"]

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_id(*parts: int) -> int:
    """Fold a tuple of small non-negative integers into one 64-bit id."""
    h = 0
    for p in parts:
        if p < 0:
            raise ValueError("stream id parts must be non-negative")
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


def stream(seed: int, *parts: int) -> np.random.Generator:
    key = (int(seed) & _MASK64) | (stream_id(*parts) << 64)
    return np.random.Generator(np.random.Philox(key=key))
