"""Named, counter-based random streams derived from a single base seed.

Every stream is addressed by a name plus integer keys, e.g. ``("shared", t)``
for the sketch vectors every node must agree on, or ``("noise", node_id, t)``
for one node's gradient noise at one step. The same address always yields the
same bits, independent of the order in which streams are requested.
"""
from __future__ import annotations

import numpy as np

STREAM_IDS = {
    "shared": 0,
    "noise": 1,
    "init": 2,
    "problem": 3,
    "projector": 4,
    "sparsify": 5,
}


def derive_seed_sequence(base_seed: int, name: str, *keys: int) -> np.random.SeedSequence:
    if name not in STREAM_IDS:
        raise KeyError(f"unknown stream name {name!r}")
    if any(int(k) < 0 for k in keys):
        raise ValueError("stream keys must be nonnegative")
    return np.random.SeedSequence(
        entropy=int(base_seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(STREAM_IDS[name], *(int(k) for k in keys)),
    )


def stream(base_seed: int, name: str, *keys: int) -> np.random.Generator:
    """Return a fresh Philox generator for the stream ``(name, *keys)``."""
    return np.random.Generator(np.random.Philox(derive_seed_sequence(base_seed, name, *keys)))
