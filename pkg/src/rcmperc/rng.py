"""Counter-based randomness.

Every random quantity in a run is a pure function of the master seed and a
tuple of integer counters (cube index, replica, slot, ...).  Nothing carries
generator state, so sampling is independent of evaluation order and of how
work is split across threads.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream tags; never reorder (changes every realization)
TAG_CUBE = 0x43554245
TAG_ORIGIN = 0x4F524947
TAG_REPLICATE = 0x5245504C
TAG_BOOTSTRAP = 0x424F4F54
TAG_TUPLES = 0x5455504C


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, elementwise on uint64 arrays."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x ^ (x >> np.uint64(30))
        x = x * _M1
        x = x ^ (x >> np.uint64(27))
        x = x * _M2
        x = x ^ (x >> np.uint64(31))
    return x


def combine(h: np.ndarray, w) -> np.ndarray:
    """Fold one word into a running hash (broadcasting)."""
    h = np.asarray(h, dtype=np.uint64)
    w = np.asarray(w).astype(np.uint64)
    with np.errstate(over="ignore"):
        return mix64(h ^ mix64(w + _GOLDEN + (h << np.uint64(6)) + (h >> np.uint64(2))))


def hash_words(*words) -> np.ndarray:
    h = np.asarray(np.uint64(0x243F6A8885A308D3))
    for w in words:
        h = combine(h, w)
    return h


def to_unit_open(h: np.ndarray) -> np.ndarray:
    """53-bit uniform on [0, 1)."""
    return (np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def to_unit_closed_right(h: np.ndarray) -> np.ndarray:
    """53-bit uniform on (0, 1]; u <= 0 is impossible, u <= 1 is certain."""
    return ((np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def derive_seed(master_seed: int, *counters: int) -> int:
    """Deterministic 64-bit child seed."""
    words = [int(master_seed) & MASK64] + [int(c) & MASK64 for c in counters]
    return int(hash_words(*[np.uint64(w) for w in words]))


def simplex_uniforms(owner_keys: np.ndarray, j: int, other_coords: np.ndarray) -> np.ndarray:
    """Acceptance variables u(sigma) for a batch of j-simplices.

    owner_keys: (k, 2) uint64 stream keys of each simplex's greatest vertex.
    other_coords: (k, j, 2) integer (m, l) coordinates of the remaining
    vertices in increasing id order.
    """
    owner_keys = np.asarray(owner_keys, dtype=np.uint64).reshape(-1, 2)
    other_coords = np.asarray(other_coords, dtype=np.int64).reshape(len(owner_keys), j, 2)
    h = combine(owner_keys[:, 0], owner_keys[:, 1])
    h = combine(h, np.uint64(j))
    for k in range(j):
        h = combine(h, other_coords[:, k, 0])
        h = combine(h, other_coords[:, k, 1])
    return to_unit_closed_right(h)
