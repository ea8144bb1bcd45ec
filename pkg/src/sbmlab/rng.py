"""Named random streams.

Every random draw in the package comes from a Philox (counter-based)
generator keyed by ``(seed, purpose)``, so e.g. label sampling and edge
sampling for the same seed are reproducible independently of each other.
"""

from __future__ import annotations

import zlib

import numpy as np


def _purpose_key(purpose) -> list[int]:
    if isinstance(purpose, (int, np.integer)):
        return [int(purpose)]
    if isinstance(purpose, tuple):
        out = []
        for p in purpose:
            out += _purpose_key(p)
        return out
    return [zlib.crc32(str(purpose).encode())]


def stream(seed, purpose="default") -> np.random.Generator:
    """Generator for the stream ``purpose`` of ``seed``.

    ``purpose`` may be a string, an int or a tuple of those.
    ``seed`` may also be a Generator, which is returned unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *_purpose_key(purpose)])
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed, *parts) -> int:
    """Derive a 63-bit integer seed from a base seed and labelled parts."""
    ss = np.random.SeedSequence([int(seed), *_purpose_key(tuple(parts))])
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))
