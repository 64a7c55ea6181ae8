import numpy as np


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence([int(s) for s in seed])
    return np.random.SeedSequence(seed)


def substream(seed, *keys) -> np.random.SeedSequence:
    """Child seed addressed by ``keys``; independent of how often it is called."""
    ss = seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + tuple(int(k) for k in keys))


def rng_for(seed, *keys) -> np.random.Generator:
    if isinstance(seed, np.random.Generator) and not keys:
        return seed
    return np.random.default_rng(substream(seed, *keys) if keys else seed_sequence(seed))
