"""Counter-based deterministic RNG derivation.

Every random decision in a pipeline is keyed by (master seed, run index,
stage name, item index), so results do not depend on evaluation order and
parallel workers can derive their own streams without sharing state.
"""

from __future__ import annotations

import zlib

import numpy as np


def seed_sequence(
    master: int, run: int = 0, stage: str = "", index: int | tuple[int, ...] = 0
) -> np.random.SeedSequence:
    """Deterministic SeedSequence for one (run, stage, item) slot.

    Stage names are folded in through crc32, which is stable across
    platforms and processes. ``index`` identifies the item; a tuple (for
    example a pixel coordinate) is spread into the key, so keep the arity
    constant within one stage.
    """
    tag = zlib.crc32(stage.encode("utf-8"))
    key = index if isinstance(index, tuple) else (index,)
    return np.random.SeedSequence(entropy=master, spawn_key=(run, tag, *key))


def rng_for(
    master: int, run: int = 0, stage: str = "", index: int | tuple[int, ...] = 0
) -> np.random.Generator:
    """Generator seeded by seed_sequence with the same arguments."""
    return np.random.default_rng(seed_sequence(master, run, stage, index))
