"""Sender utilities for binary-action receivers as set functions.

With actions ``{a0, a1}`` per receiver, an action profile is identified with
the set ``R`` of receivers playing ``a1`` and the sender utility in state
``theta`` is ``f_theta(R)``.  Sets are bitmasks: bit ``r`` is receiver ``r``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import MAX_BRUTE_FORCE_RECEIVERS, MAX_SUPERMODULAR_CHECK
from ..errors import InstanceValidationError

EXPLICIT = "explicit"
ANONYMOUS = "anonymous"
SUPERMODULAR = "supermodular"
KINDS = (EXPLICIT, ANONYMOUS, SUPERMODULAR)


def popcount(masks):
    masks = np.asarray(masks, dtype=np.int64)
    out = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        out += m & 1
        m >>= 1
    return out


def subset_sums(w):
    """``sums[mask] = sum of w[r] over bits r of mask`` for all ``2^n`` masks."""
    sums = np.zeros(1)
    for x in np.asarray(w, dtype=float):
        sums = np.concatenate([sums, sums + x])
    return sums


@dataclass(frozen=True, eq=False)
class SetFunction:
    """Family ``f_theta`` of set functions over ``n`` receivers.

    ``values`` has shape ``(d, 2^n)`` for explicit and supermodular tables
    (indexed by bitmask) and ``(d, n + 1)`` for anonymous functions (indexed
    by cardinality).
    """

    kind: str
    values: np.ndarray
    n: int
    monotone: bool = False

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", vals)
        if self.kind not in KINDS:
            raise InstanceValidationError(f"unknown set-function kind {self.kind!r}")
        width = self.n + 1 if self.kind == ANONYMOUS else 2 ** self.n
        if vals.shape[1] != width:
            raise InstanceValidationError(f"{self.kind} set function over {self.n} receivers "
                                          f"needs {width} values per state, got {vals.shape[1]}")
        if vals.min() < 0 or vals.max() > 1:
            raise InstanceValidationError("set-function values must lie in [0, 1]")
        if self.monotone and not self.is_monotone():
            raise InstanceValidationError("set function flagged monotone is not")
        if self.kind == SUPERMODULAR and self.n <= MAX_SUPERMODULAR_CHECK and not self.is_supermodular():
            raise InstanceValidationError("set function flagged supermodular is not")

    @property
    def d(self):
        return self.values.shape[0]

    def table(self):
        """Explicit ``(d, 2^n)`` table."""
        if self.kind == ANONYMOUS:
            return self.values[:, popcount(np.arange(2 ** self.n))]
        return self.values

    def value(self, theta, mask):
        if self.kind == ANONYMOUS:
            return float(self.values[theta, popcount(mask)])
        return float(self.values[theta, mask])

    def is_monotone(self, tol=1e-12):
        if self.kind == ANONYMOUS:
            return bool(np.all(np.diff(self.values, axis=1) >= -tol))
        T = self.table()
        masks = np.arange(2 ** self.n)
        for r in range(self.n):
            without = masks[(masks >> r) & 1 == 0]
            if np.any(T[:, without | (1 << r)] < T[:, without] - tol):
                return False
        return True

    def is_supermodular(self, tol=1e-12):
        """Local test ``f(S+i) + f(S+j) <= f(S+i+j) + f(S)``, which is
        equivalent to the lattice inequality."""
        T = self.table()
        masks = np.arange(2 ** self.n)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                S = masks[((masks >> i) & 1 == 0) & ((masks >> j) & 1 == 0)]
                lhs = T[:, S | (1 << i)] + T[:, S | (1 << j)]
                rhs = T[:, S | (1 << i) | (1 << j)] + T[:, S]
                if np.any(lhs > rhs + tol):
                    return False
        return True

    def to_json(self):
        return {"form": self.kind, "values": self.values.tolist(), "monotone": bool(self.monotone)}

    @classmethod
    def from_json(cls, data, n):
        return cls(data["form"], np.asarray(data["values"], dtype=float), int(n),
                   bool(data.get("monotone", False)))


def opt_oracle(f, w, theta=0):
    """Bitmask ``R`` maximising ``f_theta(R) + sum_{r in R} w_r``.

    Anonymous functions use the sorted-prefix rule (polynomial); tables are
    scanned exhaustively.  Ties go to the smaller set, then the smaller mask.
    """
    w = np.asarray(w, dtype=float)
    if w.size != f.n:
        raise ValueError("one weight per receiver is required")
    if f.kind == ANONYMOUS:
        order = np.argsort(-w, kind="stable")
        prefix = np.concatenate([[0.0], np.cumsum(w[order])])
        c = int(np.argmax(f.values[theta] + prefix))
        return int(sum(1 << int(r) for r in order[:c]))
    if f.n > MAX_BRUTE_FORCE_RECEIVERS:
        raise ValueError(f"exhaustive oracle limited to {MAX_BRUTE_FORCE_RECEIVERS} receivers")
    return int(np.argmax(f.values[theta] + subset_sums(w)))


def brute_force_oracle(f, w, theta=0):
    """Reference oracle: explicit loop over all subsets."""
    best, arg = -np.inf, 0
    for mask in range(2 ** f.n):
        val = f.value(theta, mask) + sum(w[r] for r in range(f.n) if mask >> r & 1)
        if val > best + 1e-15:
            best, arg = val, mask
    return arg, best
