"""Seed derivation: independent integer seeds from a base seed and task keys."""

import numpy as np


def derive_seed(seed, *keys):
    """64-bit seed determined by ``(seed, *keys)``; distinct keys give independent streams."""
    entropy = [int(seed)] + [int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
