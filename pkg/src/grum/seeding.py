"""Seed derivation.

Every random stream is obtained from one integer seed combined with a tuple
of role labels, so the stream seen by a given agent, iteration or candidate
does not depend on evaluation order.
"""

import zlib

import numpy as np


def _label_key(label):
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    label = int(label)
    if label < 0:
        raise ValueError(f"seed labels must be nonnegative, got {label}")
    return label


def seed_sequence(seed, *labels):
    return np.random.SeedSequence([_label_key(seed), *(_label_key(lab) for lab in labels)])


def rng_for(seed, *labels):
    """Return a fresh ``numpy.random.Generator`` for ``(seed, *labels)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *labels)))


def derive_seed(seed, *labels):
    """Derive a 32-bit integer seed, e.g. for per-round bookkeeping."""
    return int(seed_sequence(seed, *labels).generate_state(1)[0])
