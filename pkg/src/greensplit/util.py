"""Seeding helpers: every random draw flows from (run seed, stream name)."""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named randomness stream of a run.

    Streams ("traffic", "solar-clouds", "exploration", ...) can be varied
    independently by changing the run seed without entangling each other.
    """
    entropy = (int(seed) & _MASK64, zlib.crc32(name.encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))
