"""Deterministic seed derivation.

Every random stream is keyed by (root_seed, pipeline tag, job index) through
a stable 64-bit hash, so results never depend on worker count or scheduling.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def child_seed(root_seed: int, tag: str, index: int = 0) -> int:
    """Stable 64-bit hash of (root_seed, tag, index)."""
    payload = struct.pack("<Q", int(root_seed) & MASK64) + tag.encode("utf-8") + b"\x00" + struct.pack(
        "<Q", int(index) & MASK64
    )
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def derive_rng(root_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_seed(root_seed, tag, index)))
