"""Follow-the-regularized-leader over menus.

The update is ``argmax_{phi in Lambda} sum_tau g^{k_tau}(phi) - |phi|^2 / (2 alpha)``
where the norm runs over menu coordinates only.  The history enters only
through the number of times each type profile was reported, so the sum is
``sum_k c_k g^k``.

Three solvers are provided:

* ``lifted`` (default): one convex QP over the extended menu polytope plus
  one joint scheme per type profile; ``g^k`` is an LP maximum, so maximizing
  jointly over menus and joint schemes gives the exact update.
* ``supergradient``: projected supergradient ascent with a certified bound
  on the remaining gap.
* ``dual_ellipsoid`` (binary actions, set-function utilities): ellipsoid
  method on a Lagrangian dual whose only exponential family of constraints
  is handled by the optimization oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..errors import ConvergenceFailure, EllipsoidIterationLimit, NumericalFailure
from ..geometry import Polytope, ellipsoid_minimize, image_hull
from ..geometry.lp import build_highs, conic_qp, run_highs
from .menus import MenuLayout, build_extended_polytope
from .set_functions import opt_oracle
from .value import _consistency_matrix, _objective, g_supergradient, g_value_primal


@dataclass
class FtrlResult:
    menu: np.ndarray          # flat menu coordinates
    objective: float          # sum_k c_k g^k(menu) - |menu|^2 / (2 alpha)
    residual: float           # optimality certificate (method dependent)
    iterations: int = 0
    point: np.ndarray | None = None   # extended point, when available


def all_type_profiles(instance):
    return [tuple(p) for p in product(range(instance.m), repeat=instance.n)]


def profile_counts(instance, history):
    """Counts of each profile of :func:`all_type_profiles` in ``history``."""
    index = {p: i for i, p in enumerate(all_type_profiles(instance))}
    counts = np.zeros(len(index))
    for k in history:
        counts[index[tuple(int(v) for v in k)]] += 1
    return counts


def ftrl_objective(instance, menu, counts, alpha):
    """``sum_k c_k g^k(menu) - |menu|^2 / (2 alpha)`` by primal LPs."""
    menu = np.asarray(menu, dtype=float)
    lay = MenuLayout.of(instance)
    val = 0.0
    for c, k in zip(counts, all_type_profiles(instance)):
        if c > 0:
            val += c * g_value_primal(instance, menu[: lay.n_menu], k)[0]
    reg = 0.0 if alpha is None else float(menu[: lay.n_menu] @ menu[: lay.n_menu]) / (2 * alpha)
    return val - reg


class LiftedFtrl:
    """The update as a single QP (or, with ``alpha=None``, an LP) over the
    extended menu polytope and one joint scheme per type profile.

    The constraint matrices are built once; successive updates only change
    the costs of the joint-scheme columns.  The regularized problem is a
    convex QP whose Hessian is singular (extension variables and joint
    schemes are not regularized), solved by an interior-point method; the
    unregularized one is an LP.
    """

    def __init__(self, instance, alpha=None, polytope=None):
        self.instance = instance
        self.alpha = alpha
        lay = self.layout = MenuLayout.of(instance)
        L = polytope if polytope is not None else build_extended_polytope(instance)
        self.polytope = L
        self.profiles = all_type_profiles(instance)
        E = _consistency_matrix(instance.n, instance.d, instance.n_actions)
        self.block = E.shape[1]
        self.obj = _objective(instance)
        K = len(self.profiles)
        # consistency rows: E psi_k - S_k ell = 0
        sel_blocks = []
        for k in self.profiles:
            S = np.zeros((E.shape[0], lay.n_total))
            row = 0
            for r, kr in enumerate(k):
                for th in range(lay.d):
                    for a in range(lay.n_actions):
                        S[row, lay.menu_index(r, kr, th, a)] = 1.0
                        row += 1
            sel_blocks.append(-S)
        A_cons = np.hstack([np.vstack(sel_blocks), scipy.linalg.block_diag(*([E] * K))])
        n_ext = lay.n_total
        A_L = np.hstack([np.vstack([L.A_ub, L.A_eq]), np.zeros((L.n_ineq + L.n_eq, K * self.block))])
        A = np.vstack([A_L, A_cons])
        hi = np.concatenate([L.b_ub, L.b_eq, np.zeros(A_cons.shape[0])])
        # menu, extension and joint-scheme entries all lie in [0, 1] on the
        # feasible set; stating the bounds keeps the unregularized columns boxed
        col_lo = np.concatenate([np.maximum(L.lower, 0.0), np.zeros(K * self.block)])
        col_hi = np.concatenate([np.minimum(L.upper, 1.0), np.ones(K * self.block)])
        self.n_cols = n_ext + K * self.block
        diag = np.zeros(self.n_cols)
        if alpha is not None:
            diag[: lay.n_menu] = 1.0 / alpha
        self.hessian = sp.diags(diag).tocsc()
        n_rows_ub = L.n_ineq
        self.A_ub, self.b_ub = A[:n_rows_ub], hi[:n_rows_ub]
        self.A_eq, self.b_eq = A[n_rows_ub:], hi[n_rows_ub:]
        self.col_lo, self.col_hi = col_lo, col_hi

    def solve(self, counts, certify=True):
        counts = np.asarray(counts, dtype=float)
        cost = -np.concatenate([c * self.obj for c in counts])
        linear = np.concatenate([np.zeros(self.layout.n_total), cost])
        if self.alpha is None:
            status, x, _, _ = run_highs(build_highs(linear, np.vstack([self.A_ub, self.A_eq]),
                                                    np.concatenate([np.full(self.b_ub.size, -np.inf), self.b_eq]),
                                                    np.concatenate([self.b_ub, self.b_eq]),
                                                    self.col_lo, self.col_hi))
        else:
            status, x = conic_qp(self.hessian, linear, self.A_ub, self.b_ub, self.A_eq, self.b_eq,
                                 self.col_lo, self.col_hi)
        if status != "Optimal":
            raise NumericalFailure(f"FTRL model ended with status {status}")
        lay = self.layout
        menu = x[: lay.n_menu]
        lifted = float(-cost @ x[lay.n_total:])
        reg = 0.0 if self.alpha is None else float(menu @ menu) / (2 * self.alpha)
        objective = lifted - reg
        residual = 0.0
        if certify:
            # the joint schemes must attain g^k at the returned menu
            residual = abs(ftrl_objective(self.instance, menu, counts, self.alpha) - objective)
        return FtrlResult(menu.copy(), objective, residual, 1, x[: lay.n_total].copy())


class MenuProjector:
    """Euclidean projection onto the set of IC persuasive menus, one
    receiver at a time, through the vertex/facet description of each
    receiver's factor."""

    def __init__(self, instance):
        self.instance = instance
        lay = self.layout = MenuLayout.of(instance)
        self.block = lay.m * lay.d * lay.n_actions
        self.hulls = []
        n_ext_r = lay.m * lay.m * lay.n_actions
        for r in range(lay.n):
            L = build_extended_polytope(instance, receivers=[r])
            # receiver r's rows only touch its own menu and extension columns
            keep = np.zeros(lay.n_total, dtype=bool)
            keep[r * self.block:(r + 1) * self.block] = True
            keep[lay.n_menu + r * n_ext_r: lay.n_menu + (r + 1) * n_ext_r] = True
            Lr = Polytope(L.A_ub[:, keep], L.b_ub, L.A_eq[:, keep], L.b_eq,
                          L.lower[keep], L.upper[keep])
            M = np.hstack([np.eye(self.block), np.zeros((self.block, n_ext_r))])
            self.hulls.append(image_hull(M, Lr))

    def project(self, menu):
        menu = np.asarray(menu, dtype=float).reshape(self.layout.n, -1)
        return np.concatenate([H.project(menu[r]) for r, H in enumerate(self.hulls)])

    def contains(self, menu, tol=1e-8):
        menu = np.asarray(menu, dtype=float).reshape(self.layout.n, -1)
        return all(H.contains(menu[r], tol) for r, H in enumerate(self.hulls))


def _gap_bound(projector, menu, s_g, alpha):
    """Upper bound on ``max F - F(menu)`` from a supergradient of the
    unregularized part (the regularizer is handled exactly)."""
    s = s_g - menu / alpha
    target = projector.project(alpha * s_g)
    step = target - menu
    return max(0.0, float(s @ step - step @ step / (2 * alpha))), target


def ftrl_update_supergradient(instance, counts, alpha, projector=None, start=None,
                              max_iter=5000, tol=1e-7, residual_tol=1e-4):
    """Projected supergradient ascent; raises :class:`ConvergenceFailure`
    (carrying the best iterate) when the certified gap stays above
    ``residual_tol``."""
    projector = projector or MenuProjector(instance)
    profiles = all_type_profiles(instance)
    lay = MenuLayout.of(instance)
    menu = projector.project(np.zeros(lay.n_menu) if start is None else start[: lay.n_menu])
    best, best_val, best_gap = menu, -np.inf, np.inf
    prev = -np.inf
    it = 0
    for it in range(1, max_iter + 1):
        s_g = np.zeros(lay.n_menu)
        val = 0.0
        for c, k in zip(counts, profiles):
            if c > 0:
                s_g += c * g_supergradient(instance, menu, k)
                val += c * g_value_primal(instance, menu, k)[0]
        val -= menu @ menu / (2 * alpha)
        gap, target = _gap_bound(projector, menu, s_g, alpha)
        if val > best_val:
            best, best_val = menu, val
        best_gap = min(best_gap, gap + (best_val - val))
        if best_gap <= residual_tol and abs(val - prev) < tol:
            break
        prev = val
        # step alpha / it on the (1/alpha)-strongly concave objective
        menu = projector.project(menu + (alpha / it) * (s_g - menu / alpha))
    if best_gap > residual_tol:
        raise ConvergenceFailure(f"certified gap {best_gap:.2e} after {it} iterations",
                                 best, best_gap)
    return FtrlResult(best, best_val, best_gap, it)


def ftrl_update_dual_ellipsoid(instance, counts, alpha, projector=None, oracle=opt_oracle,
                               eps=1e-6, bound=2.0):
    """The update through the Lagrangian dual, for binary actions.

    Dualizing the marginal rows of each history term with multipliers
    ``x[k, r, theta]`` leaves, per profile and state, the covering
    constraints ``sum_{r in R} x + y >= mu_theta f_theta(R)`` (``y`` is fixed
    at its tight value with one oracle call) and a regularized linear
    maximization over menus, solved by projection.  The resulting convex
    function of ``x`` is minimized by the ellipsoid method; the menu is
    recovered as the maximizer at the best multipliers.
    """
    f = instance.sender_util
    if instance.n_actions != 2 or not hasattr(f, "kind"):
        raise ValueError("the dual path needs binary actions and a set-function sender utility")
    projector = projector or MenuProjector(instance)
    lay = MenuLayout.of(instance)
    n, d = lay.n, lay.d
    profiles = [k for c, k in zip(counts, all_type_profiles(instance)) if c > 0]
    weights = np.array([c for c in counts if c > 0], dtype=float)
    K = len(profiles)
    mu = instance.prior
    dim = K * n * d
    if dim == 0:
        menu = projector.project(np.zeros(lay.n_menu))
        return FtrlResult(menu, -float(menu @ menu) / (2 * alpha), 0.0, 0)

    def coeff(x):
        C = np.zeros(lay.menu_shape)
        for i, k in enumerate(profiles):
            for r, kr in enumerate(k):
                C[r, kr, :, 1] += weights[i] * x[i, r]
        return C.ravel()

    def evaluate(z):
        x = z.reshape(K, n, d)
        C = coeff(x)
        menu = projector.project(alpha * C)
        val = float(C @ menu - menu @ menu / (2 * alpha))
        grad = np.zeros((K, n, d))
        M = menu.reshape(lay.menu_shape)
        for i, k in enumerate(profiles):
            for th in range(d):
                R = oracle(f, -x[i, :, th] / mu[th], th)
                bits = np.array([(R >> r) & 1 for r in range(n)], dtype=float)
                val += weights[i] * (mu[th] * f.value(th, R) - bits @ x[i, :, th])
                for r, kr in enumerate(k):
                    grad[i, r, th] = weights[i] * (M[r, kr, th, 1] - bits[r])
        return val, grad.ravel(), menu

    total_iter = 0
    prev = None
    for _ in range(8):
        def sep(z):
            out = np.flatnonzero(np.abs(z) > bound)
            if out.size:
                a = np.zeros(dim)
                a[out[0]] = np.sign(z[out[0]])
                return "cut", a, bound
            val, grad, _ = evaluate(z)
            return "value", val, grad

        res = ellipsoid_minimize(sep, np.zeros(dim), np.sqrt(dim) * (1.0 + bound), eps=eps)
        total_iter += res.iterations
        # stop when the box is slack, or when enlarging it cannot lower the
        # dual value by more than the certified accuracy
        if np.max(np.abs(res.point)) < 0.9 * bound or (prev is not None
                                                         and prev - res.lower_bound <= 2 * eps):
            break
        prev, bound = res.value, 4.0 * bound
    else:
        raise EllipsoidIterationLimit("dual search box kept binding", res.point, res.value)
    _, _, menu = evaluate(res.point)
    primal = ftrl_objective(instance, menu, counts, alpha)
    # dual value bounds the optimum from above; the gap certifies the menu
    return FtrlResult(menu, primal, max(0.0, res.value - primal), total_iter)


def ftrl_update(instance, history, alpha, method="lifted", **kwargs):
    """FTRL menu for the given history of reported type profiles.

    ``history`` is a sequence of profiles; an empty history gives the
    minimum-norm menu.
    """
    counts = profile_counts(instance, history)
    if method == "lifted":
        return LiftedFtrl(instance, alpha).solve(counts)
    if method == "supergradient":
        return ftrl_update_supergradient(instance, counts, alpha, **kwargs)
    if method == "dual_ellipsoid":
        return ftrl_update_dual_ellipsoid(instance, counts, alpha, **kwargs)
    raise ValueError(f"unknown FTRL method {method!r}")


def best_menu_in_hindsight(instance, history):
    """``(value, menu)`` maximizing ``sum_t g^{k_t}`` over IC persuasive menus."""
    res = LiftedFtrl(instance, None).solve(profile_counts(instance, history))
    return res.objective, res.menu
