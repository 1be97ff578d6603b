"""Named random substreams derived from a master seed.

Every consumer of randomness asks for a stream keyed by
``(purpose, *indices)``, e.g. ``("energy", device, round)``.  The key is
folded into a :class:`numpy.random.SeedSequence` spawn key, so the draws a
device sees never depend on how many draws some other device made, or on
the order in which devices are advanced.
"""

from __future__ import annotations

import zlib

import numpy as np

# Fixed ids keep the counter scheme stable across Python processes
# (``hash`` of a str is salted per process).
PURPOSES = {
    "task": 1,
    "topology": 2,
    "energy": 3,
    "phase": 4,
    "batch": 5,
    "channel": 6,
    "noise": 7,
    "bound": 8,
    "init": 9,
}


def purpose_id(purpose: str) -> int:
    try:
        return PURPOSES[purpose]
    except KeyError:
        # Unregistered names still map deterministically.
        return 1000 + zlib.crc32(purpose.encode("utf-8"))


def substream(seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, purpose, *indices)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = (purpose_id(purpose),) + tuple(int(i) for i in indices)
    if any(k < 0 for k in key):
        raise ValueError(f"substream indices must be non-negative, got {indices}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
