"""Ellipsoid method for convex minimisation with a separation oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EllipsoidIterationLimit


@dataclass
class EllipsoidResult:
    point: np.ndarray
    value: float
    iterations: int
    converged: bool
    lower_bound: float = -np.inf


def ellipsoid_iterations(dim, radius, eps=1e-6):
    """Volume-based iteration budget ``2 dim^2 ln(R0 / eps)``."""
    return int(np.ceil(2 * dim * dim * np.log(max(radius / eps, np.e))))


def ellipsoid_minimize(oracle, center, radius, eps=1e-6, max_iter=None, strict=False,
                       gap_tol=None):
    """Minimise a convex function over a convex set, both given by ``oracle``.

    ``oracle(x)`` returns either ``("cut", a, b)`` for a violated constraint
    ``a.x <= b`` (deep cut) or ``("value", f, g)`` with the objective value
    and a subgradient at a feasible ``x``.  The search starts from the ball
    of the given radius.  Returns the best feasible point seen.

    Every value step certifies ``f* >= f - sqrt(g' P g)`` (the minimiser
    stays in the ellipsoid), and the search stops once the best value is
    within ``gap_tol`` (default ``eps``) of the best such bound.
    """
    gap_tol = eps if gap_tol is None else gap_tol
    lower = -np.inf
    c = np.array(center, dtype=float)
    n = c.size
    P = np.eye(n) * radius ** 2
    max_iter = max_iter or ellipsoid_iterations(n, radius, eps)
    best_x, best_f = None, np.inf
    it = 0
    for it in range(1, max_iter + 1):
        kind, a, b = oracle(c)
        if kind == "value":
            f, g = float(a), np.asarray(b, dtype=float)
            if f < best_f:
                best_x, best_f = c.copy(), f
            lower = max(lower, f - float(np.sqrt(max(g @ P @ g, 0.0))))
            if best_f - lower <= gap_tol:
                break
            # cut g.(x - c) <= 0, deepened by the gap to the incumbent
            a, b = g, float(g @ c) - (f - best_f)
        a = np.asarray(a, dtype=float)
        Pa = P @ a
        s2 = float(a @ Pa)
        if s2 <= 1e-300:
            break
        s = np.sqrt(s2)
        alpha = (float(a @ c) - b) / s
        if alpha >= 1.0:
            # the cut misses the ellipsoid: nothing left to search
            break
        alpha = max(alpha, -1.0 / n + 1e-12) if n > 1 else max(alpha, -1.0 + 1e-12)
        if n == 1:
            lo, hi = c[0] - np.sqrt(P[0, 0]), c[0] + np.sqrt(P[0, 0])
            cut = b / a[0]
            if a[0] > 0:
                hi = min(hi, cut)
            else:
                lo = max(lo, cut)
            c = np.array([(lo + hi) / 2])
            P = np.array([[((hi - lo) / 2) ** 2]])
        else:
            tau = (1 + n * alpha) / (n + 1)
            sigma = 2 * (1 + n * alpha) / ((n + 1) * (1 + alpha))
            delta = n * n * (1 - alpha * alpha) / (n * n - 1.0)
            c = c - tau * Pa / s
            P = delta * (P - sigma * np.outer(Pa, Pa) / s2)
            P = 0.5 * (P + P.T)
        if np.sqrt(max(np.max(np.diag(P)), 0.0)) < eps * 1e-3:
            break
    converged = best_x is not None
    if not converged and strict:
        raise EllipsoidIterationLimit("no feasible point found", None, np.inf)
    return EllipsoidResult(best_x, best_f, it, converged, lower)
