"""Random persuasion instances and security games."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import (MAX_ACTIONS, MAX_RECEIVERS, MAX_SET_FUNCTION_RECEIVERS, MAX_STATES,
                      MAX_TYPES)
from ..errors import ParamError
from ..persuasion import PersuasionInstance
from ..rng import make_rng
from ..type_reporting.set_functions import ANONYMOUS, SetFunction

SENDER_KINDS = ("tensor", ANONYMOUS)
MIN_PRIOR = 0.01


def _int_param(params, key, default, lo, hi):
    try:
        v = int(params.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ParamError(f"{key} must be an integer") from exc
    if not lo <= v <= hi:
        raise ParamError(f"{key}={v} outside [{lo}, {hi}]")
    return v


def generate_instance(params, seed):
    """Random instance.

    ``params`` keys: ``n`` (receivers), ``states``, ``actions``, ``types``
    and ``sender`` (``"tensor"`` or ``"anonymous"``).  Utilities are uniform
    on ``[0, 1]``; the prior is Dirichlet(1) with components clamped below at
    0.01 and renormalized.  Anonymous sender utilities have nondecreasing
    values in the number of receivers taking action 1, hence are monotone.
    """
    params = dict(params or {})
    sender = params.get("sender", "tensor")
    if sender not in SENDER_KINDS:
        raise ParamError(f"sender must be one of {SENDER_KINDS}")
    max_n = MAX_SET_FUNCTION_RECEIVERS if sender == ANONYMOUS else MAX_RECEIVERS
    n = _int_param(params, "n", 1, 1, max_n)
    d = _int_param(params, "states", 2, 1, MAX_STATES)
    m = _int_param(params, "types", 2, 1, MAX_TYPES)
    A = _int_param(params, "actions", 2, 2, MAX_ACTIONS)
    if sender == ANONYMOUS and A != 2:
        raise ParamError("set-function sender utilities need binary actions")
    unknown = set(params) - {"n", "states", "types", "actions", "sender", "seed"}
    if unknown:
        raise ParamError(f"unknown instance parameters {sorted(unknown)}")
    rng = make_rng(seed, "instance")
    prior = rng.dirichlet(np.ones(d))
    prior = np.maximum(prior, MIN_PRIOR)
    prior /= prior.sum()
    U = rng.random((n, m, A, d))
    if sender == ANONYMOUS:
        S = SetFunction(ANONYMOUS, np.sort(rng.random((d, n + 1)), axis=1), n, monotone=True)
    else:
        S = rng.random((A,) * n + (d,))
    return PersuasionInstance(prior, U, S)


@dataclass(frozen=True, eq=False)
class SecurityGame:
    """One defender resource over ``N`` targets, ``D`` attacker types.

    Arrays are ``(D, N)``: attacker payoff when the attacked target is
    covered / uncovered, and the defender's payoff in the same two cases.
    All payoffs lie in ``[0, 1]``.
    """

    att_covered: np.ndarray
    att_uncovered: np.ndarray
    def_covered: np.ndarray
    def_uncovered: np.ndarray

    @property
    def D(self):
        return self.att_covered.shape[0]

    @property
    def N(self):
        return self.att_covered.shape[1]

    def attacked(self, x):
        """Target attacked by each type against coverage ``x`` (rows of
        ``x`` may be batched); ties go to the lowest index."""
        x = np.atleast_2d(x)
        val = x[:, None, :] * self.att_covered + (1 - x[:, None, :]) * self.att_uncovered
        best = val >= val.max(axis=2, keepdims=True) - 1e-12
        return np.argmax(best, axis=2)                      # (B, D)

    def losses(self, x):
        """Defender loss ``1 - utility`` against each attacker type."""
        x = np.atleast_2d(x)
        tgt = self.attacked(x)
        types = np.arange(self.D)[None, :]
        cov = np.take_along_axis(x, tgt, axis=1)
        util = cov * self.def_covered[types, tgt] + (1 - cov) * self.def_uncovered[types, tgt]
        return 1.0 - util


def random_security_game(N, D, seed):
    """Attackers prefer uncovered targets, the defender covered ones."""
    rng = make_rng(seed, "security-game")
    lo = rng.uniform(0.0, 0.5, size=(2, D, N))
    hi = rng.uniform(0.5, 1.0, size=(2, D, N))
    return SecurityGame(lo[0], hi[0], hi[1], lo[1])


def simplex_grid(N, resolution):
    """All points of the simplex in ``R^N`` with coordinates in
    ``(1 / resolution) Z``."""
    pts = []

    def rec(prefix, left):
        if len(prefix) == N - 1:
            pts.append(prefix + [left])
            return
        for v in range(left + 1):
            rec(prefix + [v], left - v)

    rec([], resolution)
    return np.array(pts, dtype=float) / resolution


def commitment_value(game, weights):
    """Best defender utility ``sum_d w_d u_d(x)`` over the continuous simplex.

    Enumerates the attacked target of every type and solves one LP per
    assignment (strict attacker preference is relaxed to weak, so this is
    the supremum).
    """
    from itertools import product
    from ..geometry import Polytope, solve_lp
    N, D = game.N, game.D
    best = -np.inf
    for tgt in product(range(N), repeat=D):
        rows, rhs = [], []
        for d, t in enumerate(tgt):
            # attacker d weakly prefers t: u_d(j) - u_d(t) <= 0
            for j in range(N):
                if j == t:
                    continue
                row = np.zeros(N)
                row[j] += game.att_covered[d, j] - game.att_uncovered[d, j]
                row[t] -= game.att_covered[d, t] - game.att_uncovered[d, t]
                rows.append(row)
                rhs.append(game.att_uncovered[d, t] - game.att_uncovered[d, j])
        obj = np.zeros(N)
        const = 0.0
        for d, t in enumerate(tgt):
            obj[t] += weights[d] * (game.def_covered[d, t] - game.def_uncovered[d, t])
            const += weights[d] * game.def_uncovered[d, t]
        poly = Polytope.from_constraints(N, np.array(rows) if rows else None,
                                         np.array(rhs) if rhs else None,
                                         np.ones((1, N)), np.ones(1), lower=0.0)
        sol = solve_lp(obj, poly, "Max")
        if sol.optimal:
            best = max(best, sol.value + const)
    return best
