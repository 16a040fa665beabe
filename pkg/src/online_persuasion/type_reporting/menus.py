"""Menus of marginal signaling schemes and their incentive constraints.

A menu assigns to every receiver ``r`` and reportable type ``k`` a direct
marginal scheme ``phi^{r,k}_theta(a)``.  Menus are stored as arrays of shape
``(n, m, d, |A|)``, flattened in that order.  The extended description of
the incentive-compatible, persuasive menus adds one variable
``l^{r,k,k'}_a`` per receiver, pair of types and action: an upper bound on
what type ``k`` earns from the scheme of type ``k'`` when ``a`` is
recommended.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Polytope


@dataclass(frozen=True)
class MenuLayout:
    n: int
    m: int
    d: int
    n_actions: int

    @classmethod
    def of(cls, instance):
        return cls(instance.n, instance.m, instance.d, instance.n_actions)

    @property
    def menu_shape(self):
        return (self.n, self.m, self.d, self.n_actions)

    @property
    def n_menu(self):
        return self.n * self.m * self.d * self.n_actions

    @property
    def n_ext(self):
        return self.n * self.m * self.m * self.n_actions

    @property
    def n_total(self):
        return self.n_menu + self.n_ext

    def menu_index(self, r, k, theta, a):
        return int(np.ravel_multi_index((r, k, theta, a), self.menu_shape))

    def ext_index(self, r, k, kp, a):
        return self.n_menu + int(np.ravel_multi_index((r, k, kp, a),
                                                      (self.n, self.m, self.m, self.n_actions)))

    def menu_of(self, point):
        """Menu part of an extended point, shaped ``(n, m, d, |A|)``."""
        return np.asarray(point, dtype=float)[: self.n_menu].reshape(self.menu_shape)


def build_extended_polytope(instance, receivers=None):
    """Extended polytope whose projection on menu coordinates is the set of
    IC, direct and persuasive menus (one factor per receiver).

    Rows, for each receiver ``r`` and types ``k, k'``:

    * ``sum_a l^{k,k'}_a <= sum_{theta,a} mu phi^k_theta(a) u_k(a, theta)``
      (truthful value dominates the value of reporting ``k'``; ``k = k'``
      gives persuasiveness);
    * ``l^{k,k'}_a >= sum_theta mu phi^{k'}_theta(a) u_k(a', theta)`` for
      every recommended ``a`` and response ``a'``;
    * ``sum_a phi^k_theta(a) = 1`` and ``phi >= 0``.
    """
    lay = MenuLayout.of(instance)
    receivers = range(lay.n) if receivers is None else receivers
    mu = instance.prior
    A = lay.n_actions
    ub_rows, eq_rows = [], []
    for r in receivers:
        U = instance.receiver_utils[r]
        for k in range(lay.m):
            for kp in range(lay.m):
                row = np.zeros(lay.n_total)
                for a in range(A):
                    row[lay.ext_index(r, k, kp, a)] = 1.0
                    for th in range(lay.d):
                        row[lay.menu_index(r, k, th, a)] -= mu[th] * U[k, a, th]
                ub_rows.append(row)
                for a in range(A):
                    for ap in range(A):
                        row = np.zeros(lay.n_total)
                        row[lay.ext_index(r, k, kp, a)] = -1.0
                        for th in range(lay.d):
                            row[lay.menu_index(r, kp, th, a)] = mu[th] * U[k, ap, th]
                        ub_rows.append(row)
            for th in range(lay.d):
                row = np.zeros(lay.n_total)
                for a in range(A):
                    row[lay.menu_index(r, k, th, a)] = 1.0
                eq_rows.append(row)
    lower = np.concatenate([np.zeros(lay.n_menu), np.full(lay.n_ext, -np.inf)])
    return Polytope.from_constraints(lay.n_total, np.array(ub_rows), np.zeros(len(ub_rows)),
                                     np.array(eq_rows), np.ones(len(eq_rows)), lower=lower)


def report_values(instance, menu, r):
    """``V[..., k, k']``: expected utility of type ``k`` of receiver ``r``
    when it reports ``k'`` and then best-responds to each recommendation.
    ``menu`` may carry leading batch dimensions."""
    lay = MenuLayout.of(instance)
    menu = np.asarray(menu, dtype=float)
    menu = menu[..., : lay.n_menu].reshape(menu.shape[:-1] + lay.menu_shape)
    U = instance.receiver_utils[r]                                # (m, A', d)
    weighted = menu[..., r, :, :, :] * instance.prior[:, None]    # (..., k', d, a)
    # value[k, k', a, a'] = sum_theta mu phi^{k'}_theta(a) u_k(a', theta)
    vals = np.einsum("...qta,kbt->...kqab", weighted, U)
    return vals.max(axis=-1).sum(axis=-1)


def ic_gain(instance, menu):
    """Largest gain any receiver type gets by misreporting (``<= 0`` for IC
    menus); batched over leading dimensions of ``menu``."""
    worst = None
    for r in range(instance.n):
        V = report_values(instance, menu, r)
        diag = np.diagonal(V, axis1=-2, axis2=-1)[..., :, None]
        g = (V - diag).max(axis=(-2, -1))
        worst = g if worst is None else np.maximum(worst, g)
    return worst if np.ndim(worst) else float(worst)


def obedience_gain(instance, menu):
    """Largest ex-ante gain from deviating from a recommendation of the
    scheme of one's own type; batched like :func:`ic_gain`."""
    lay = MenuLayout.of(instance)
    menu = np.asarray(menu, dtype=float)
    menu = menu[..., : lay.n_menu].reshape(menu.shape[:-1] + lay.menu_shape)
    worst = None
    for r in range(instance.n):
        U = instance.receiver_utils[r]
        w = menu[..., r, :, :, :] * instance.prior[:, None]       # (..., k, d, a)
        vals = np.einsum("...kta,kbt->...kab", w, U)              # (..., k, a, a')
        follow = np.diagonal(vals, axis1=-2, axis2=-1)
        g = (vals.max(axis=-1) - follow).max(axis=(-2, -1))
        worst = g if worst is None else np.maximum(worst, g)
    return worst if np.ndim(worst) else float(worst)


def truthful_reports(instance, menu, profile, tol=1e-9):
    """Types reported by receivers choosing their best menu entry (ties
    resolved truthfully)."""
    out = []
    for r, k in enumerate(profile):
        V = report_values(instance, menu, r)[int(k)]
        best = np.flatnonzero(V >= V.max() - tol)
        out.append(int(k) if k in best else int(best[0]))
    return tuple(out)


def product_scheme(instance, menu, profile):
    """Joint scheme ``(d, |A|^n)`` with independent marginals
    ``phi^{r, k_r}``."""
    menu = np.asarray(menu, dtype=float).reshape(MenuLayout.of(instance).menu_shape)
    out = np.ones((instance.d,) + (instance.n_actions,) * instance.n)
    for r, k in enumerate(profile):
        shape = [instance.d] + [1] * instance.n
        shape[1 + r] = instance.n_actions
        out = out * menu[r, k].reshape(shape)
    return out.reshape(instance.d, -1)


def single_receiver_loss_matrix(instance):
    """``m x (menu + extension)`` loss matrix for one receiver: row ``k`` is
    ``1 - u_s(phi^k)`` on normalised menus, zero on extension columns."""
    if instance.n != 1:
        raise ValueError("single-receiver construction")
    lay = MenuLayout.of(instance)
    us = instance.sender_tensor                 # (A, d)
    M = np.zeros((lay.m, lay.n_total))
    for k in range(lay.m):
        for th in range(lay.d):
            for a in range(lay.n_actions):
                M[k, lay.menu_index(0, k, th, a)] = instance.prior[th] * (1.0 - us[a, th])
    return M


def min_norm_menu(instance, polytope=None):
    """Menu of smallest Euclidean norm in the extended polytope."""
    from ..geometry import solve_qp
    lay = MenuLayout.of(instance)
    L = polytope if polytope is not None else build_extended_polytope(instance)
    H = np.diag(np.concatenate([np.ones(lay.n_menu), np.zeros(lay.n_ext)]))
    x, _ = solve_qp(H, np.zeros(lay.n_total), L)
    return x
