"""Oblivious adversaries: fixed sequences of loss or type indices.

The battery mixes a constant sequence, a periodic one, an i.i.d. one with a
random bias, and a two-phase sequence that switches to a different index
halfway through, after the learner has settled.
"""
from __future__ import annotations

import numpy as np

from ..rng import make_rng

KINDS = ("constant", "periodic", "iid", "two_phase")


def adversary_sequence(kind, n_options, T, seed):
    """Sequence of ``T`` indices in ``range(n_options)``."""
    rng = make_rng(seed, "adversary")
    if kind == "constant":
        return np.full(T, int(rng.integers(n_options)), dtype=int)
    if kind == "periodic":
        block = int(rng.integers(1, 9))
        order = rng.permutation(n_options)
        return order[(np.arange(T) // block) % n_options]
    if kind == "iid":
        p = rng.dirichlet(np.ones(n_options))
        return rng.choice(n_options, size=T, p=p)
    if kind == "two_phase":
        first = int(rng.integers(n_options))
        second = (first + 1 + int(rng.integers(max(n_options - 1, 1)))) % n_options
        seq = np.full(T, first, dtype=int)
        seq[T // 2:] = second
        return seq
    raise ValueError(f"unknown adversary kind {kind!r}")


def battery_kind(index):
    """Adversary kind used for the ``index``-th seed of a battery."""
    return KINDS[index % len(KINDS)]
