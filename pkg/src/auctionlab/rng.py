"""Deterministic, named random streams.

Every source of randomness in the library derives from a (seed, purpose)
pair mapped onto a Philox counter-based generator, so results are
bit-reproducible across runs and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream"]


def _purpose_key(purpose: str) -> int:
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Return an independent generator for the given seed and purpose tag."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    key = _purpose_key(purpose) ^ (seed | (seed << 64))
    return np.random.Generator(np.random.Philox(key=key & (2**128 - 1)))
