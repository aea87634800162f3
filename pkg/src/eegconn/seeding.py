"""Deterministic seed derivation.

All randomness in a run flows from a single master seed.  Sub-streams are
derived by hashing the master seed together with purpose labels, so adding
a new consumer never shifts the draws of an existing one.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *labels: object) -> int:
    """Hash ``master`` and the purpose labels into a 64-bit child seed."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(master: int, *labels: object) -> np.random.Generator:
    """A fresh Generator seeded from ``master`` and the purpose labels."""
    return np.random.default_rng(derive_seed(master, *labels))
