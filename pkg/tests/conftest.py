import numpy as np

from frogsim.environment import ConfigLaw, Environment, _flat_index
from frogsim.walks import SeedSpec


def env_from_counts(dim, radius, counts, seed=None, law=None, conditioned=False):
    """Hand-built environment: zero everywhere except the given site counts."""
    law = law or ConfigLaw.bernoulli(0.5)
    seed = seed or SeedSpec(0, "fixture")
    cube = np.zeros((2 * radius + 1) ** dim, dtype=np.int32)
    for x, c in counts.items():
        cube[_flat_index(np.array([x], dtype=np.int64), radius, dim)[0]] = c
    return Environment(dim, radius, law, seed, conditioned, cube)
