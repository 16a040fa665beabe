"""Exact Euclidean projection onto polytopes."""
from __future__ import annotations

import numpy as np

from ..config import TOL_FEAS
from ..errors import NumericalFailure


def project_halfspaces(c, G, h, tol=1e-12, max_iter=None):
    """Solve ``min ||t - c||^2 / 2`` s.t. ``G t <= h`` exactly.

    Goldfarb-Idnani dual active-set method specialised to the identity
    Hessian: start from the unconstrained minimiser ``c`` and add violated
    constraints one at a time, dropping active ones whose multiplier would
    turn negative.  Returns ``(t, active, multipliers)``.
    """
    c = np.asarray(c, dtype=float)
    t = c.copy()
    m, p = G.shape
    if m == 0:
        return t, [], np.zeros(0)
    scale = np.maximum(np.linalg.norm(G, axis=1), 1e-300)
    active: list[int] = []
    u = np.zeros(0)
    max_iter = max_iter or 20 * (m + p) + 50
    it = 0
    while True:
        viol = (G @ t - h) / scale
        q_idx = int(np.argmax(viol))
        if viol[q_idx] <= tol * (1.0 + abs(h[q_idx]) / scale[q_idx]):
            return t, active, u
        n = G[q_idx]
        u_q = 0.0
        while True:
            it += 1
            if it > max_iter:
                raise NumericalFailure("projection active-set loop did not terminate")
            if active:
                NA = G[active]
                r, *_ = np.linalg.lstsq(NA.T, n, rcond=None)
                step_dir = n - NA.T @ r
            else:
                r = np.zeros(0)
                step_dir = n
            nrm2 = float(step_dir @ step_dir)
            full = (G[q_idx] @ t - h[q_idx]) / nrm2 if nrm2 > 1e-20 * (n @ n) else np.inf
            pos = r > 1e-14
            if np.any(pos):
                ratios = np.full(r.shape, np.inf)
                ratios[pos] = u[pos] / r[pos]
                k = int(np.argmin(ratios))
                partial = ratios[k]
            else:
                partial = np.inf
            if not np.isfinite(full) and not np.isfinite(partial):
                raise NumericalFailure("projection target polytope is empty")
            s = min(full, partial)
            if np.isfinite(full) or s > 0:
                t = t - s * step_dir
            u = u - s * r
            u_q += s
            if full <= partial:
                active.append(q_idx)
                u = np.append(u, u_q)
                break
            del active[k]
            u = np.delete(u, k)


def project_euclidean(z, polytope, tol=TOL_FEAS):
    """Euclidean projection of ``z`` onto ``polytope``.

    Equalities are removed by null-space reparameterisation, then the
    remaining inequalities are handled by :func:`project_halfspaces`.
    """
    z = np.asarray(z, dtype=float)
    red = polytope.affine_reduction
    if red is None:
        raise NumericalFailure("equality constraints are inconsistent")
    x0, N = red
    G, h = polytope.inequality_form()
    if N.shape[1] == 0:
        y = x0
    else:
        target = N.T @ (z - x0)
        Gt = G @ N
        ht = h - G @ x0
        keep = np.linalg.norm(Gt, axis=1) > 1e-12
        if np.any(ht[~keep] < -tol):
            raise NumericalFailure("projection target polytope is empty")
        t, _, _ = project_halfspaces(target, Gt[keep], ht[keep])
        y = x0 + N @ t
    if polytope.violation(y) > tol:
        raise NumericalFailure(f"projection left a violation of {polytope.violation(y):.2e}")
    return y
