"""Deterministic seed derivation for nested stochastic stages.

Every stage (episode, trial, epoch, restart) derives its own seed from the
master seed plus stable integer keys, so any stage can be re-run in
isolation and resumed runs continue bit-identically.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    raise TypeError(f"seed key must be int or str, got {type(part).__name__}")


def derive_seed(master, *parts) -> int:
    """Stable 64-bit seed from a master seed and a tuple of int/str keys."""
    entropy = [_as_key(master), *(_as_key(p) for p in parts)]
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])
