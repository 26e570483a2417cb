"""Counter-based random streams keyed by (master seed, replication, role).

All randomness flows through Philox generators seeded by a SeedSequence
whose spawn key encodes the replication index and a stream role, so
replication streams are independent and insensitive to scheduling order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ROLE_PATH", "ROLE_INIT", "ROLE_AUX", "make_generator", "rep_key"]

ROLE_PATH = 0
ROLE_INIT = 1
ROLE_AUX = 2


def _entropy(seed) -> int:
    if isinstance(seed, (tuple, list)):
        # fold structured seeds into the spawn key instead
        raise TypeError("seed must be a plain integer; use key=... for structure")
    return int(seed)


def make_generator(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream (seed; key...)."""
    ss = np.random.SeedSequence(entropy=_entropy(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def rep_key(rep: int, role: int = ROLE_PATH) -> tuple[int, int]:
    return (int(rep), int(role))
