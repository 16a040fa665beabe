"""The sender's value ``g^k`` of a menu for a reported type profile.

``g^k(menu)`` is the best expected sender utility over joint direct schemes
on ``A^n`` whose marginals are the entries ``phi^{r, k_r}`` of the menu.  It
is computed by an LP over joint action profiles (primal), and for binary
actions with a set-function sender utility also by an ellipsoid method on
the dual whose separation step calls an optimization oracle.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import EllipsoidIterationLimit, NumericalFailure
from ..geometry import Polytope, ellipsoid_minimize, solve_lp
from .menus import MenuLayout, product_scheme
from .set_functions import opt_oracle


@lru_cache(maxsize=64)
def _consistency_matrix(n, d, n_actions):
    """Rows ``(r, theta, a_hat)``: sum of ``x[theta, a]`` over profiles with
    ``a_r = a_hat``.  Columns are ``(theta, profile)`` row-major."""
    P = n_actions ** n
    digits = np.array(np.unravel_index(np.arange(P), (n_actions,) * n)).T
    E = np.zeros((n * d * n_actions, d * P))
    for r in range(n):
        for th in range(d):
            for a in range(n_actions):
                row = (r * d + th) * n_actions + a
                E[row, th * P + np.flatnonzero(digits[:, r] == a)] = 1.0
    E.setflags(write=False)
    return E


def _marginal_rhs(instance, menu, profile):
    menu = np.asarray(menu, dtype=float).reshape(MenuLayout.of(instance).menu_shape)
    return np.concatenate([menu[r, k].ravel() for r, k in enumerate(profile)])


def _objective(instance):
    # mu_theta * u_s(a, theta), columns (theta, profile)
    S = instance.sender_tensor.reshape(-1, instance.d)
    return (S * instance.prior[None, :]).T.ravel()


def _solve_primal(instance, menu, profile):
    profile = tuple(int(k) for k in profile)
    E = _consistency_matrix(instance.n, instance.d, instance.n_actions)
    b = _marginal_rhs(instance, menu, profile)
    poly = Polytope.from_constraints(E.shape[1], A_eq=E, b_eq=b, lower=0.0)
    sol = solve_lp(_objective(instance), poly, "Max")
    if not sol.optimal:
        # the product of the marginals is always feasible
        prod = product_scheme(instance, menu, profile).ravel()
        raise NumericalFailure(f"marginal-consistency LP returned {sol.status}; "
                               f"product scheme residual {np.abs(E @ prod - b).max():.2e}")
    return sol


def g_value_primal(instance, menu, profile):
    """``(g^k(menu), joint scheme)``; the scheme has shape ``(d, |A|^n)``
    with profiles indexed row-major over receivers."""
    sol = _solve_primal(instance, menu, profile)
    x = np.clip(sol.point, 0.0, None).reshape(instance.d, -1)
    return sol.value, x


def _c_transform(c, w, n, n_actions, sweeps=20):
    """Tighten dual potentials ``w[r, a]`` (one state) so that each equals
    the smallest value keeping ``sum_r w[r, a_r] >= c[a]`` feasible."""
    shape = (n_actions,) * n
    C = c.reshape(shape)
    for _ in range(sweeps):
        change = 0.0
        for r in range(n):
            rest = np.zeros(shape)
            for q in range(n):
                if q != r:
                    sh = [1] * n
                    sh[q] = n_actions
                    rest = rest + w[q].reshape(sh)
            new = np.moveaxis(C - rest, r, 0).reshape(n_actions, -1).max(axis=1)
            change = max(change, float(np.max(np.abs(new - w[r]))))
            w[r] = new
        if change < 1e-13:
            break
    return w


def g_supergradient(instance, menu, profile):
    """Supergradient of ``g^k`` at ``menu``, over menu coordinates.

    Built from the duals of the marginal-consistency rows: tightened per
    receiver, then centred within each ``(r, theta)`` block, which leaves
    its inner product with any direction inside the menu set unchanged.
    Entries for types not in ``profile`` are zero.
    """
    profile = tuple(int(k) for k in profile)
    lay = MenuLayout.of(instance)
    sol = _solve_primal(instance, menu, profile)
    A, d, n = lay.n_actions, lay.d, lay.n
    W = sol.duals_eq.reshape(n, d, A).copy()
    c = _objective(instance).reshape(d, -1)
    grad = np.zeros(lay.menu_shape)
    for th in range(d):
        w = _c_transform(c[th], [W[r, th].copy() for r in range(n)], n, A)
        for r, k in enumerate(profile):
            grad[r, k, th] = w[r] - w[r].mean()
    return grad.ravel()


# -- binary actions: dual LP by the ellipsoid method ------------------------

def _chain_sets(p):
    """Nested sets (top-j receivers by ``p``) supporting a feasible joint
    distribution with marginals ``p``."""
    order = np.argsort(-p, kind="stable")
    masks = [0]
    for r in order:
        masks.append(masks[-1] | (1 << int(r)))
    return masks


def _restricted_primal(f, theta, mu, p, masks):
    """Best joint distribution on the given sets with marginals ``p``."""
    masks = sorted(set(masks))
    n = p.size
    E = np.array([[(mask >> r) & 1 for mask in masks] for r in range(n)] + [[1] * len(masks)],
                 dtype=float)
    poly = Polytope.from_constraints(len(masks), A_eq=E, b_eq=np.concatenate([p, [1.0]]), lower=0.0)
    obj = np.array([mu * f.value(theta, mask) for mask in masks])
    sol = solve_lp(obj, poly, "Max")
    if not sol.optimal:
        raise NumericalFailure(f"restricted primal returned {sol.status}")
    return sol.value, dict(zip(masks, np.clip(sol.point, 0.0, None)))


def _dual_state(f, theta, mu, p, oracle, eps, bound):
    """Minimise ``p.x + y`` s.t. ``sum_{r in R} x_r + y >= mu f(R)`` within
    the box ``|x|, |y| <= bound``.  Returns (value, x, cut sets)."""
    n = p.size
    cuts = []

    def sep(z):
        x, y = z[:n], z[n]
        out = np.flatnonzero(np.abs(z) > bound)
        if out.size:
            i = out[0]
            a = np.zeros(n + 1)
            a[i] = np.sign(z[i])
            return "cut", a, bound
        R = oracle(f, -x / mu, theta)
        members = np.array([(R >> r) & 1 for r in range(n)], dtype=float)
        viol = mu * f.value(theta, R) - members @ x - y
        if viol > 1e-12:
            cuts.append(R)
            return "cut", -np.concatenate([members, [1.0]]), -mu * f.value(theta, R)
        return "value", p @ x + y, np.concatenate([p, [1.0]])

    radius = np.sqrt(n + 1) * (1.0 + bound)
    res = ellipsoid_minimize(sep, np.zeros(n + 1), radius, eps=eps)
    if not res.converged:
        raise EllipsoidIterationLimit("ellipsoid found no dual-feasible point", None, np.inf)
    x = res.point[:n]
    # exact y for the best x (feasible by construction of the oracle)
    R = oracle(f, -x / mu, theta)
    cuts.append(R)
    y = mu * f.value(theta, R) - sum(x[r] for r in range(n) if R >> r & 1)
    return float(p @ x + y), x, cuts


def g_value_dual_ellipsoid(instance, menu, profile, oracle=opt_oracle, eps=1e-6,
                           return_scheme=False):
    """``g^k(menu)`` for binary actions from the dual LP, one state at a time.

    The dual of the binary rewrite is
    ``min sum_r phi^{r,k_r}_theta(a1) x_r + y`` subject to
    ``sum_{r in R} x_r + y >= mu_theta f_theta(R)`` for all sets ``R``; the
    most violated row at ``(x, y)`` is ``R* = oracle(f_theta, -x / mu_theta)``.
    The search box is doubled until it no longer binds.  With
    ``return_scheme`` the joint scheme is recovered from an LP restricted to
    the sets that produced cuts (plus a nested chain that keeps it feasible).
    """
    f = instance.sender_util
    if instance.n_actions != 2 or not hasattr(f, "kind"):
        raise ValueError("the dual path needs binary actions and a set-function sender utility")
    lay = MenuLayout.of(instance)
    menu = np.asarray(menu, dtype=float).reshape(lay.menu_shape)
    n = lay.n
    total = 0.0
    scheme = np.zeros((lay.d, 2 ** n))
    weights_bits = 1 << np.arange(n)[::-1]
    for th in range(lay.d):
        mu = float(instance.prior[th])
        p = np.array([menu[r, int(k), th, 1] for r, k in enumerate(profile)])
        bound, prev = 2.0, None
        for _ in range(8):
            val, x, cuts = _dual_state(f, th, mu, p, oracle, eps, bound)
            if np.max(np.abs(x), initial=0.0) < 0.9 * bound or \
                    (prev is not None and abs(val - prev) < 1e-9):
                break
            prev, bound = val, 4.0 * bound
        else:
            raise EllipsoidIterationLimit("dual search box kept binding", x, val)
        total += val
        if return_scheme:
            _, psi = _restricted_primal(f, th, mu, p, cuts + _chain_sets(p))
            for mask, w in psi.items():
                bits = np.array([(mask >> r) & 1 for r in range(n)])
                scheme[th, int(bits @ weights_bits)] += w
    if return_scheme:
        return total, scheme
    return total


def consistency_residual(instance, menu, profile, scheme):
    """Largest violation of the marginal constraints by a joint scheme."""
    E = _consistency_matrix(instance.n, instance.d, instance.n_actions)
    b = _marginal_rhs(instance, menu, tuple(int(k) for k in profile))
    x = np.asarray(scheme, dtype=float).ravel()
    return max(float(np.abs(E @ x - b).max()), float(np.max(-x, initial=0.0)),
               float(np.abs(x.reshape(instance.d, -1).sum(axis=1) - 1).max()))


def joint_value(instance, scheme):
    """Expected sender utility of a joint scheme ``(d, |A|^n)``."""
    return float(_objective(instance) @ np.asarray(scheme, dtype=float).ravel())
