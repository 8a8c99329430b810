from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Fixed stream offsets; each consumer of randomness draws from its own stream."""

    INIT = 0
    SHUFFLE = 1
    DOWNSAMPLE = 2
    DROPOUT = 3
    SYNTH_TRAIN = 4
    SYNTH_TEST = 5
    GRADCHECK = 6


def make_rng(seed: int, stream: Stream) -> np.random.Generator:
    """
    Build the generator for one consumer.

    The generator is PCG64 (64-bit state, 128-bit internal) seeded through a
    SeedSequence over the pair (seed, stream). Distinct streams are statistically
    independent, so adding draws to one consumer never shifts another.
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, int(stream)])))
