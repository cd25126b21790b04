"""Named random streams derived from a single top-level seed.

Every random decision in a run (batch sampling, triplet sampling,
query/gallery splits, weight init) draws from its own named stream, so a
component can be re-run in isolation and still see exactly the draws it
saw inside the full pipeline.
"""

from __future__ import annotations

import zlib

import numpy as np

_SEED_MASK = (1 << 63) - 1


def _seed_sequence(seed: int, stream: str) -> np.random.SeedSequence:
    key = zlib.crc32(stream.encode("utf-8"))
    return np.random.SeedSequence(entropy=seed & _SEED_MASK, spawn_key=(key,))


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    """Generator for the named stream under the top-level seed."""
    return np.random.default_rng(_seed_sequence(seed, stream))


def stream_seed(seed: int, stream: str) -> int:
    """Plain integer seed for APIs that take a seed rather than a Generator."""
    return int(_seed_sequence(seed, stream).generate_state(1, dtype=np.uint64)[0])
