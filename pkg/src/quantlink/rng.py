"""Deterministic RNG streams keyed by structured labels.

Seeds come from hashing the key tuple with SHA-256, so streams are stable
across runs and platforms, and adding a new stream (say, one more trial)
never perturbs existing ones. Keys should be ints and strings; floats are
formatted by str() and therefore work, but grid indices are preferred.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream_seed", "stream_rng"]


def stream_seed(*keys) -> int:
    text = "\x1f".join(str(k) for k in keys)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def stream_rng(*keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(stream_seed(*keys))))
