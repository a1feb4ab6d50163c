"""Deterministic RNG streams.

Every stochastic step in the package draws from a Generator obtained through
``rng_for(seed, *path)``. The stream depends only on the seed and the path
labels, never on call order, so checkpoint-resume replays the exact noise of
an uninterrupted run.
"""

import hashlib

import numpy as np


def derive_seed(seed, *path):
    """Hash (seed, path) down to an integer usable as a fresh base seed."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:16], "little")


def rng_for(seed, *path):
    """Return an independent Generator keyed by (seed, path).

    Args:
        seed: base integer seed for the whole run.
        path: any hashable labels (strings, ints) naming the consumer,
            e.g. ``rng_for(7, "adv", round_idx, "gen", 0)``.
    """
    return np.random.default_rng(derive_seed(seed, *path))
