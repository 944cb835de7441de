"""Reproducible random streams.

Every replica owns an independent Philox stream keyed by ``(seed, replica)``.
Philox is counter-based, so streams for different replicas never overlap and
any replica can be regenerated on its own.
"""
import numpy as np

from .exceptions import DomainError

U64_MAX = 2**64 - 1


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= U64_MAX:
        raise DomainError("seed must fit in 64 unsigned bits")
    return seed


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Generator for one replica: Philox keyed by the seed and the replica index."""
    key = np.array([check_seed(seed), check_seed(replica)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return replica_rng(rng, 0)
