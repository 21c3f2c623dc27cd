"""Deterministic seed derivation: one user seed fans out to every random stream."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, tag: str, *index) -> int:
    """64-bit seed from ``(seed, tag, index...)``, stable across platforms and runs."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    h.update(b"\x00" + tag.encode())
    for i in index:
        h.update(b"\x00" + str(i).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, tag: str, *index) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, tag, *index))
