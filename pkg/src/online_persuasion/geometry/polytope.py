from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from ..config import TOL_FEAS


def _as_rows(A, dim):
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((0, dim))
    return np.atleast_2d(A)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Polyhedron ``{x : A_ub x <= b_ub, A_eq x = b_eq, lower <= x <= upper}``.

    Bounds default to ``-inf`` / ``+inf``; builders for probability-like
    variables pass ``lower=0``.
    """

    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        # lower/upper are always full length; the matrices must agree with them.
        dim = np.asarray(self.lower).size
        if dim < 1:
            raise ValueError("polytope needs at least one coordinate")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "A_ub", _as_rows(self.A_ub, dim))
        object.__setattr__(self, "A_eq", _as_rows(self.A_eq, dim))
        object.__setattr__(self, "b_ub", np.asarray(self.b_ub, dtype=float).reshape(-1))
        object.__setattr__(self, "b_eq", np.asarray(self.b_eq, dtype=float).reshape(-1))
        object.__setattr__(self, "lower", np.broadcast_to(np.asarray(self.lower, float), (dim,)).copy())
        object.__setattr__(self, "upper", np.broadcast_to(np.asarray(self.upper, float), (dim,)).copy())
        if self.A_ub.shape != (self.b_ub.size, dim) or self.A_eq.shape != (self.b_eq.size, dim):
            raise ValueError("constraint matrix and right-hand side sizes disagree")

    @classmethod
    def from_constraints(cls, dim, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                         lower=-np.inf, upper=np.inf):
        empty = np.zeros((0, dim))
        if dim < 1:
            raise ValueError("polytope needs at least one coordinate")
        return cls(
            empty if A_ub is None else A_ub,
            np.zeros(0) if b_ub is None else b_ub,
            empty if A_eq is None else A_eq,
            np.zeros(0) if b_eq is None else b_eq,
            np.broadcast_to(np.asarray(lower, float), (dim,)),
            np.broadcast_to(np.asarray(upper, float), (dim,)),
        )

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, float)
        hi = np.broadcast_to(np.asarray(hi, float), lo.shape)
        return cls.from_constraints(lo.size, lower=lo, upper=hi)

    @classmethod
    def simplex(cls, n):
        return cls.from_constraints(n, A_eq=np.ones((1, n)), b_eq=[1.0], lower=0.0)

    @property
    def n_ineq(self):
        return self.b_ub.size

    @property
    def n_eq(self):
        return self.b_eq.size

    def inequality_form(self):
        """All inequalities (rows and finite bounds) stacked as ``G x <= h``."""
        eye = np.eye(self.dim)
        lo = np.isfinite(self.lower)
        hi = np.isfinite(self.upper)
        G = np.vstack([self.A_ub, -eye[lo], eye[hi]])
        h = np.concatenate([self.b_ub, -self.lower[lo], self.upper[hi]])
        return G, h

    def violation(self, x):
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, float)
        parts = [np.zeros(1)]
        if self.n_ineq:
            parts.append(self.A_ub @ x - self.b_ub)
        if self.n_eq:
            parts.append(np.abs(self.A_eq @ x - self.b_eq))
        parts.append(self.lower - x)
        parts.append(x - self.upper)
        return float(max(np.max(p) for p in parts))

    def contains(self, x, tol=TOL_FEAS):
        return self.violation(x) <= tol

    def is_feasible(self):
        from .lp import solve_lp
        return solve_lp(np.zeros(self.dim), self).status == "Optimal"

    @cached_property
    def affine_reduction(self):
        """Particular solution ``x0`` and orthonormal null-space basis ``N``
        of the equality system, so feasible points are ``x0 + N t``."""
        if self.n_eq == 0:
            return np.zeros(self.dim), np.eye(self.dim)
        x0, *_ = np.linalg.lstsq(self.A_eq, self.b_eq, rcond=None)
        if np.max(np.abs(self.A_eq @ x0 - self.b_eq)) > 1e-9 * (1 + np.abs(self.b_eq).max()):
            return None
        N = scipy.linalg.null_space(self.A_eq, rcond=1e-10)
        return x0, N

    def restrict(self, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
        """A new polytope with extra rows appended."""
        A1 = self.A_ub if A_ub is None else np.vstack([self.A_ub, A_ub])
        b1 = self.b_ub if b_ub is None else np.concatenate([self.b_ub, b_ub])
        A2 = self.A_eq if A_eq is None else np.vstack([self.A_eq, A_eq])
        b2 = self.b_eq if b_eq is None else np.concatenate([self.b_eq, b_eq])
        return Polytope(A1, b1, A2, b2, self.lower, self.upper)

    def __repr__(self):
        return f"Polytope(dim={self.dim}, n_ineq={self.n_ineq}, n_eq={self.n_eq})"
