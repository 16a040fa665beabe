"""LP solving on top of HiGHS with certified duals, and convex QPs with an
interior-point solver."""
from __future__ import annotations

from dataclasses import dataclass

import clarabel
import highspy
import numpy as np
import scipy.sparse as sp

from ..config import TOL_FEAS, TOL_GAP
from ..errors import NumericalFailure

_INF = highspy.kHighsInf
_MS = highspy.HighsModelStatus


@dataclass(frozen=True)
class LpSolution:
    """Result of :func:`solve_lp`.

    Dual conventions (for both senses, with ``s = +1`` for Max and ``-1``
    for Min)::

        s * c == A_ub.T @ duals_ineq + A_eq.T @ duals_eq + reduced_costs

    with ``duals_ineq >= 0``; a positive reduced cost sits at an upper
    bound, a negative one at a lower bound.
    """

    status: str
    point: np.ndarray | None = None
    value: float | None = None
    duals_eq: np.ndarray | None = None
    duals_ineq: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None

    @property
    def optimal(self):
        return self.status == "Optimal"


def _new_highs(tight=False):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("presolve", "off")
    tol = 1e-10 if tight else 1e-9
    h.setOptionValue("primal_feasibility_tolerance", tol)
    h.setOptionValue("dual_feasibility_tolerance", tol)
    return h


def _finite(v):
    v = np.asarray(v, dtype=float).copy()
    v[v == np.inf] = _INF
    v[v == -np.inf] = -_INF
    return v


def build_highs(cost, A, row_lo, row_hi, col_lo, col_hi, hessian=None, tight=False):
    """Load ``min cost.x (+ x'Hx/2)`` s.t. ``row_lo <= A x <= row_hi``,
    ``col_lo <= x <= col_hi`` into a fresh HiGHS instance."""
    h = _new_highs(tight)
    n = len(cost)
    lp = highspy.HighsLp()
    lp.num_col_ = n
    lp.num_row_ = A.shape[0]
    lp.col_cost_ = np.asarray(cost, float)
    lp.col_lower_ = _finite(col_lo)
    lp.col_upper_ = _finite(col_hi)
    lp.row_lower_ = _finite(row_lo)
    lp.row_upper_ = _finite(row_hi)
    M = sp.csc_matrix(A)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = M.indptr
    lp.a_matrix_.index_ = M.indices
    lp.a_matrix_.value_ = M.data
    lp.a_matrix_.num_col_ = n
    lp.a_matrix_.num_row_ = A.shape[0]
    h.passModel(lp)
    if hessian is not None:
        Q = sp.csc_matrix(sp.tril(sp.csc_matrix(hessian)))
        hs = highspy.HighsHessian()
        hs.dim_ = n
        hs.format_ = highspy.HessianFormat.kTriangular
        hs.start_ = Q.indptr
        hs.index_ = Q.indices
        hs.value_ = Q.data
        h.passHessian(hs)
    return h


def run_highs(h):
    """Run a loaded model; returns (status, x, row_dual, col_dual)."""
    h.run()
    status = h.getModelStatus()
    if status == _MS.kOptimal:
        sol = h.getSolution()
        return ("Optimal", np.array(sol.col_value), np.array(sol.row_dual),
                np.array(sol.col_dual))
    if status == _MS.kInfeasible:
        return "Infeasible", None, None, None
    if status == _MS.kUnbounded:
        return "Unbounded", None, None, None
    if status == _MS.kUnboundedOrInfeasible:
        return "UnboundedOrInfeasible", None, None, None
    return str(status), None, None, None


def _stack(polytope):
    A = np.vstack([polytope.A_ub, polytope.A_eq])
    lo = np.concatenate([np.full(polytope.n_ineq, -np.inf), polytope.b_eq])
    hi = np.concatenate([polytope.b_ub, polytope.b_eq])
    return A, lo, hi


def _certify(c_max, polytope, x, y, w, r):
    """Primal feasibility, complementary slackness and duality gap of a
    claimed optimum of ``max c_max.x``; returns the worst residuals."""
    feas = polytope.violation(x)
    slack_rows = polytope.b_ub - polytope.A_ub @ x
    cs = float(np.max(np.abs(y * slack_rows), initial=0.0))
    dual_obj = polytope.b_ub @ y + polytope.b_eq @ w
    bound = np.where(r > 0, polytope.upper, polytope.lower)
    # a reduced cost against an absent bound is dual infeasibility; it is
    # dropped here and shows up in the stationarity residual below
    r = np.where(np.isfinite(bound), r, 0.0)
    active = np.abs(r) > 1e-12
    dual_obj += r[active] @ bound[active]
    cs = max(cs, float(np.max(np.abs(r[active] * (x[active] - bound[active])), initial=0.0)))
    gap = abs(c_max @ x - dual_obj)
    dual_infeas = max(float(np.max(-y, initial=0.0)),
                      float(np.max(np.abs(c_max - polytope.A_ub.T @ y - polytope.A_eq.T @ w - r),
                                   initial=0.0)))
    return feas, cs, gap, dual_infeas


def solve_lp(objective, polytope, sense="Max"):
    """Optimize a linear objective over ``polytope``.

    Returns an :class:`LpSolution` whose duals certify optimality; the gap
    check is ``|primal - dual| <= TOL_GAP * max(1, |value|)``.
    Raises :class:`NumericalFailure` when HiGHS stops without a verdict or
    the certificate does not check out.
    """
    c = np.asarray(objective, dtype=float)
    if c.shape != (polytope.dim,):
        raise ValueError(f"objective has length {c.size}, polytope dim is {polytope.dim}")
    if sense not in ("Max", "Min"):
        raise ValueError("sense must be 'Max' or 'Min'")
    s = 1.0 if sense == "Max" else -1.0
    A, lo, hi = _stack(polytope)
    last = None
    for tight in (False, True):
        h = build_highs(-s * c, A, lo, hi, polytope.lower, polytope.upper, tight=tight)
        status, x, row_dual, col_dual = run_highs(h)
        if status == "UnboundedOrInfeasible":
            h = build_highs(np.zeros_like(c), A, lo, hi, polytope.lower, polytope.upper)
            feas_status = run_highs(h)[0]
            status = "Unbounded" if feas_status == "Optimal" else "Infeasible"
        if status in ("Infeasible", "Unbounded"):
            return LpSolution(status)
        if status != "Optimal":
            raise NumericalFailure(f"HiGHS returned {status}")
        y = -row_dual[: polytope.n_ineq]
        w = -row_dual[polytope.n_ineq:]
        r = -col_dual
        # clip dual noise of the order of the solver tolerance
        y = np.where(y < 0, np.where(y > -1e-9, 0.0, y), y)
        value = float(c @ x)
        feas, cs, gap, dual_infeas = _certify(s * c, polytope, x, y, w, r)
        scale = max(1.0, abs(value))
        last = (feas, cs, gap, dual_infeas)
        if feas <= TOL_FEAS and cs <= TOL_FEAS * scale and gap <= TOL_GAP * scale \
                and dual_infeas <= TOL_FEAS * scale:
            return LpSolution("Optimal", x, value, w, y, r)
    raise NumericalFailure(
        "LP optimum could not be certified (feas=%.2e, cs=%.2e, gap=%.2e, dual=%.2e)" % last)


def conic_qp(hessian, linear, A_ub, b_ub, A_eq, b_eq, lower, upper, tol=1e-10):
    """Minimize ``x'Hx/2 + linear.x`` (H positive semidefinite) with the
    interior-point solver Clarabel.  Returns ``(status, x)``."""
    n = len(linear)
    lower = np.broadcast_to(np.asarray(lower, float), (n,))
    upper = np.broadcast_to(np.asarray(upper, float), (n,))
    lo_idx = np.flatnonzero(np.isfinite(lower))
    hi_idx = np.flatnonzero(np.isfinite(upper))
    eye = sp.identity(n, format="csr")
    A = sp.vstack([sp.csr_matrix(A_eq).reshape(-1, n) if np.size(A_eq) else sp.csr_matrix((0, n)),
                   sp.csr_matrix(A_ub).reshape(-1, n) if np.size(A_ub) else sp.csr_matrix((0, n)),
                   -eye[lo_idx], eye[hi_idx]]).tocsc()
    b = np.concatenate([np.asarray(b_eq, float).ravel(), np.asarray(b_ub, float).ravel(),
                        -lower[lo_idx], upper[hi_idx]])
    n_eq = np.size(b_eq)
    cones = [clarabel.ZeroConeT(n_eq)] if n_eq else []
    cones.append(clarabel.NonnegativeConeT(b.size - n_eq))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = settings.tol_gap_rel = tol
    settings.tol_feas = tol
    P = sp.triu(sp.csc_matrix(hessian)).tocsc()
    solver = clarabel.DefaultSolver(P, np.asarray(linear, float), A, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    if status not in ("Solved", "AlmostSolved"):
        return status, None
    return "Optimal", np.array(sol.x)


def solve_qp(hessian, linear, polytope):
    """Minimize ``x'Hx/2 + linear.x`` over ``polytope`` (H positive semidefinite).

    Returns ``(x, value)``; raises :class:`NumericalFailure` unless the
    solver reports optimality.
    """
    status, x = conic_qp(hessian, linear, polytope.A_ub, polytope.b_ub, polytope.A_eq,
                         polytope.b_eq, polytope.lower, polytope.upper)
    if status != "Optimal":
        raise NumericalFailure(f"QP solve ended with status {status}")
    H = sp.csc_matrix(hessian)
    return x, float(0.5 * x @ (H @ x) + np.asarray(linear) @ x)
