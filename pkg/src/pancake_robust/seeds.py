"""Deterministic seeding utilities.

Every random procedure in the package draws from a counter-based Philox
generator keyed by an explicit 64-bit seed, so identical seeds reproduce
identical streams on any platform running the same numpy version.  Stage
seeds are split from a master seed by hashing ``"{master}:{stage}"`` with
SHA-256 and keeping the first 8 bytes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, stage: str) -> int:
    """Child seed for a named stage, independent across stage names."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator keyed directly by the seed (no entropy pooling)."""
    if seed < 0:
        raise ValueError("seeds must be non-negative integers")
    return np.random.Generator(np.random.Philox(key=seed))
