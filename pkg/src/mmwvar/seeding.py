"""Deterministic seed derivation from one root seed."""
import hashlib

import numpy as np


def _key(k):
    if isinstance(k, (int, np.integer)):
        return int(k)
    return int.from_bytes(hashlib.blake2b(str(k).encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(root, *keys):
    """A 63-bit seed for the stream identified by ``keys`` under ``root``."""
    ss = np.random.SeedSequence(int(root), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
