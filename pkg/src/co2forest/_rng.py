"""Deterministic random streams keyed by tuples of non-negative integers.

Every source of randomness in the package draws from a generator built
here, so results are reproducible and independent of thread scheduling:
a worker derives its stream from its logical position (seed, tree, node),
never from execution order.
"""

import numpy as np


def make_rng(*key: int) -> np.random.Generator:
    """Independent PCG64 generator for an integer key tuple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))
