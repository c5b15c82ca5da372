"""Deterministic random streams.

Every randomized stage derives its generator from the single dataset seed
plus a stage name, so stages can be re-run in isolation and still reproduce
the full-pipeline result bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MAX = 2**64 - 1


def _tag(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for stage `name` under the dataset `seed`.

    `extra` integers (camera number, fold number, ...) further split the
    stream.  Same arguments, same stream, always.
    """
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    entropy = [seed, _tag(name), *[int(e) & SEED_MAX for e in extra]]
    return np.random.default_rng(np.random.SeedSequence(entropy))
