"""Seedable random streams with deterministic, worker-independent substreams.

All Monte Carlo loops in this package draw from per-replication substreams of
a counter-based Philox generator.  Replication ``i`` of a run seeded with
``seed`` always sees the same stream, no matter how the replications are
distributed over workers.
"""

from __future__ import annotations

import numpy as np

# Written into critical-value cache headers; a cache is only reused when the
# generator contract matches.
ALGORITHM_ID = "numpy-philox4x64-jumped"


def substream(seed: int, index: int) -> np.random.Generator:
    """Return the generator for substream ``index`` of the stream ``seed``.

    Substreams are Philox streams spaced 2**128 steps apart, so they never
    overlap for any realistic draw count.
    """
    if index < 0:
        raise ValueError(f"substream index must be >= 0, got {index}")
    return np.random.Generator(np.random.Philox(key=seed).jumped(index))


def derived_stream(seed: int, tag: int) -> np.random.Generator:
    """Generator for auxiliary draws (e.g. extra optimizer starts).

    Uses a seed-sequence path disjoint from :func:`substream` so auxiliary
    consumers cannot collide with replication substreams.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 0x5EED, tag))))
