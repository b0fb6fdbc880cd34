"""
Deterministic random streams
Per-node and per-trial generators derived from a master seed

Every random draw in the package comes from a generator keyed by
(master seed, level, index, purpose). The draw for a node never depends on the
order in which nodes are visited or on how many workers share the work.
"""

import hashlib
from functools import lru_cache
from typing import Tuple

import numpy as np

SEED_MASK = (1 << 64) - 1


@lru_cache(maxsize=256)
def purpose_code(purpose: str) -> int:
    """
    Stable 64-bit code for a purpose tag

    Args:
        purpose: Short tag such as "channel" or "edge"

    Returns:
        Unsigned integer derived from a blake2b digest of the tag
    """
    digest = hashlib.blake2b(purpose.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _sequence(master_seed: int, key: Tuple[int, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed) & SEED_MASK, spawn_key=key)


def node_rng(master_seed: int, level: int, index: int, purpose: str) -> np.random.Generator:
    """
    Generator for one node and one purpose

    Args:
        master_seed: Experiment or model seed
        level: Node level (root is 0)
        index: Node index within its level
        purpose: Purpose tag, keeps independent draws for the same node apart

    Returns:
        numpy Generator
    """
    key = (int(level), int(index), purpose_code(purpose))
    return np.random.default_rng(_sequence(master_seed, key))


def derive_seed(master_seed: int, *keys: int) -> int:
    """
    Child seed for (master_seed, keys), e.g. a trial seed from (grid point, trial)

    Returns:
        64-bit unsigned integer
    """
    words = _sequence(master_seed, tuple(int(k) for k in keys)).generate_state(2, np.uint32)
    return (int(words[0]) << 32) | int(words[1])
