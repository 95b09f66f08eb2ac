"""Counter-style seed derivation: every stream is a pure function of its key."""

from __future__ import annotations

import numpy as np

# sub-stream tags inside one replicate
GAUSS = 0
JUMPS = 1
PATH = 2


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        master, *key = seed
        return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return np.random.SeedSequence(int(seed))


def replicate_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Seed for replicate ``key`` of an experiment, independent of execution order."""
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))


def child(seq: np.random.SeedSequence, tag: int) -> np.random.SeedSequence:
    # SeedSequence.spawn() mutates its parent; build the child key explicitly instead
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (tag,))


def generator(seq: np.random.SeedSequence, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child(seq, tag)))
