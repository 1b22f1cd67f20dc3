"""Seeded random streams.

Every consumer derives its generator from ``(seed, *stream)`` with a
counter-based bit generator, so results do not depend on execution order.
"""
from __future__ import annotations

import os

import numpy as np


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(key))


def max_workers() -> int:
    """Parallelism cap from ``RECTEX_THREADS`` (default: all cores)."""
    raw = os.environ.get("RECTEX_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1
