"""Named random sub-streams derived from one root seed."""

import zlib

import numpy as np


def substream(seed, name):
    """Independent generator for component ``name`` under root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def derive_seed(seed, name):
    """Integer seed for APIs that take a seed rather than a generator."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
