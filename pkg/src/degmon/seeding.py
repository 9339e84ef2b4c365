"""Stable seed derivation.

Every stochastic component draws from a numpy Generator seeded by a
stable hash of its identifying context, so data generation is
order-independent and reproducible across processes.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stable_seed(*parts) -> int:
    """Derive a 64-bit seed from an arbitrary tuple of ints/strings.

    The derivation is a SHA-256 over the canonical string form of the
    parts, so it is stable across runs, platforms, and Python versions
    (unlike the builtin hash()).
    """
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & _MASK64


def rng_for(*parts) -> np.random.Generator:
    """numpy Generator seeded by stable_seed(*parts)."""
    return np.random.default_rng(stable_seed(*parts))
