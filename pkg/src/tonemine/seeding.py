"""Deterministic seed derivation.

Every stochastic step derives its generator from the global seed plus a
string/interval tag path, via SHA-256. This keeps runs reproducible no
matter how work is scheduled, and avoids Python's salted ``hash()``.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Collapse (seed, tag, tag, ...) into a stable 64-bit seed."""
    blob = "\x1f".join(repr(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def derive_rng(*parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
