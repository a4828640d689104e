"""Deterministic, platform-stable derivation of RNG streams.

Seeds for nested work units (graph resampling attempts, sweep cells, method
runs) are derived by hashing the ancestor seed together with a label path,
so concurrent execution order can never change any drawn value.
"""

import hashlib

import numpy as np


def derive_entropy(*parts):
    payload = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(payload).digest(), "big")


def derive_rng(*parts):
    return np.random.default_rng(np.random.SeedSequence(derive_entropy(*parts)))
