"""Deterministic RNG stream derivation.

Every randomized operation in the engine owns a dedicated stream derived
from (seed, purpose-tag), so adding or reordering one consumer never
perturbs another. Tags are hashed with SHA-256 (Python's builtin ``hash``
is salted per process and must not be used here).
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, tag: str) -> int:
    """Return a 64-bit seed derived from a base seed and a purpose tag."""
    digest = hashlib.sha256(f"{seed}/{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & _MASK64


def derive_rng(seed: int, tag: str) -> np.random.Generator:
    """Return a fresh Generator for the (seed, tag) stream."""
    return np.random.default_rng(derive_seed(seed, tag))
