"""
Counter-Based Random Streams
Every consumer of randomness (Monte-Carlo path blocks, calibration start
jitter, synthetic quote noise) draws from a Philox substream keyed by the
user seed and selected by an integer index. Streams never overlap and do not
depend on evaluation order, so parallel execution reproduces serial output.
"""

from __future__ import annotations

import numpy as np

from src.errors import InputValidationError

SEED_MAX = 2**64 - 1


def validate_seed(seed: int) -> int:
    if not 0 <= seed <= SEED_MAX:
        raise InputValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def substream(seed: int, index: int, domain: int = 0) -> np.random.Generator:
    """Return the generator for stream `index` of `seed`.

    The index occupies the top counter word and `domain` the one below it,
    leaving the two low words (2**128 blocks of four 64-bit draws) to the
    stream itself.
    """
    validate_seed(seed)
    if index < 0 or domain < 0:
        raise InputValidationError("stream index and domain must be nonnegative")
    bit_generator = np.random.Philox(key=seed, counter=[0, 0, domain, index])
    return np.random.Generator(bit_generator)
