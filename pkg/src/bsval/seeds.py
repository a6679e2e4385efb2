"""Deterministic seed derivation.

A master seed is split into independent named streams by hashing the seed
together with a label path, e.g. ``derive_seed(7, "mcmc", 3)``.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    """64-bit seed from a master seed and a path of labels (str or int)."""
    key = ":".join([str(int(master))] + [str(label) for label in labels])
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


def rng_for(master: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *labels))
