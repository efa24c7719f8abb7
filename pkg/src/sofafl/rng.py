"""Labelled random streams.

Every random draw in a run comes from a generator keyed by the global seed
plus a tuple of labels, e.g. ``stream(seed, "local", client, round)``.  The
labels are hashed with BLAKE2b, so the stream for one component does not
depend on how many other components consumed randomness before it.  This is
what makes per-client training schedule-independent and lets a new
component be added without perturbing existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(labels: tuple) -> list[int]:
    digest = hashlib.blake2b(repr(labels).encode("utf-8"), digest_size=16).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def stream(seed: int, *labels) -> np.random.Generator:
    """Return an independent generator for ``(seed, *labels)``."""
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_label_words(labels)])
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *labels) -> int:
    """A 31-bit integer seed derived the same way as :func:`stream`."""
    return int(stream(seed, *labels).integers(0, 2**31 - 1))
