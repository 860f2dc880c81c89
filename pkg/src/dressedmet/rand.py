"""Deterministic random streams.

All randomness in the package flows from one 64-bit seed through the
counter-based Philox generator: ``stream(seed, k)`` returns the k-th
independent stream for that seed.  Parallel workers draw from disjoint
streams, so results do not depend on scheduling order.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator number ``index`` for the given seed."""
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
