"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, stream)``, so a run is a pure function of its seed and the draws of
one purpose (sampling states, choosing atoms, exploration) never shift when
another purpose draws more or fewer numbers.
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def stream_id(name):
    """Stable 64-bit identifier for a named stream."""
    return zlib.crc32(name.encode()) & MASK64


def make_rng(seed, stream="default"):
    return np.random.Generator(np.random.Philox(key=_key(seed, stream)))


def seed_list(seed, n):
    """``n`` derived seeds for independent repetitions of an experiment."""
    rng = make_rng(seed, "seed-list")
    return [int(s) for s in rng.integers(0, 2 ** 63 - 1, size=n)]


def _key(seed, stream):
    sid = stream_id(stream) if isinstance(stream, str) else int(stream) & MASK64
    return np.array([int(seed) & MASK64, sid], dtype=np.uint64)


def round_uniforms(seed, stream, t):
    """The four uniforms reserved for round ``t`` of a stream.

    Philox produces four 64-bit words per counter step, so round ``t`` owns
    counter block ``t``; :func:`stream_uniforms` returns the same numbers
    for all rounds at once.
    """
    bg = np.random.Philox(key=_key(seed, stream))
    bg.advance(int(t))
    return np.random.Generator(bg).random(4)


def stream_uniforms(seed, stream, T):
    """Uniforms of rounds ``0..T-1`` as a ``(T, 4)`` array."""
    return np.random.Generator(np.random.Philox(key=_key(seed, stream))).random(4 * int(T)).reshape(-1, 4)
