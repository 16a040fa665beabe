"""Bayesian persuasion with private signals and receiver types.

A direct scheme recommends one action per (receiver, type).  Receiver ``r``
gets the private signal ``s_r`` in ``A^m`` (its recommendations for each of
its ``m`` possible types) and the joint signal is the tuple of private
signals.  Schemes are stored flat: coordinate ``theta * |A|^(m n) + s`` where
``s`` is the row-major index of the digits ``(s_1, ..., s_n)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .config import MAX_ACTIONS, MAX_RECEIVERS, MAX_STATES, MAX_TYPES, TOL_FEAS, TOL_TIE
from .errors import InstanceValidationError, ZeroProbabilitySignal
from .geometry import Polytope, solve_lp
from .type_reporting.set_functions import SetFunction


@dataclass(frozen=True, eq=False)
class PersuasionInstance:
    """Prior ``mu`` over ``d`` states, ``n`` receivers with ``m`` types each
    and a common action set of size ``n_actions``.

    ``receiver_utils[r, k, a, theta]`` is ``u^r_k(a, theta)``.  The sender
    utility is either a tensor indexed ``[a_1, ..., a_n, theta]`` or a
    :class:`SetFunction` for binary actions.
    """

    prior: np.ndarray
    receiver_utils: np.ndarray
    sender_util: object

    def __post_init__(self):
        prior = np.asarray(self.prior, dtype=float)
        U = np.asarray(self.receiver_utils, dtype=float)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "receiver_utils", U)
        if prior.ndim != 1 or np.any(prior <= 0) or abs(prior.sum() - 1) > 1e-9:
            raise InstanceValidationError("prior must be a strictly positive probability vector")
        if U.ndim != 4 or U.shape[3] != prior.size:
            raise InstanceValidationError("receiver_utils must have shape (n, m, |A|, d)")
        if U.min() < 0 or U.max() > 1:
            raise InstanceValidationError("receiver utilities must lie in [0, 1]")
        if isinstance(self.sender_util, SetFunction):
            f = self.sender_util
            if self.n_actions != 2 or f.n != self.n or f.d != self.d:
                raise InstanceValidationError("set-function sender utility needs binary actions "
                                              "and matching n, d")
        else:
            S = np.asarray(self.sender_util, dtype=float)
            object.__setattr__(self, "sender_util", S)
            if S.shape != (self.n_actions,) * self.n + (self.d,):
                raise InstanceValidationError(f"sender tensor must have shape "
                                              f"{(self.n_actions,) * self.n + (self.d,)}")
            if S.min() < 0 or S.max() > 1:
                raise InstanceValidationError("sender utilities must lie in [0, 1]")

    # -- sizes -----------------------------------------------------------
    @property
    def n(self):
        return self.receiver_utils.shape[0]

    @property
    def m(self):
        return self.receiver_utils.shape[1]

    @property
    def n_actions(self):
        return self.receiver_utils.shape[2]

    @property
    def d(self):
        return self.prior.size

    @property
    def n_private_signals(self):
        return self.n_actions ** self.m

    @property
    def n_signals(self):
        return self.n_actions ** (self.m * self.n)

    @property
    def scheme_dim(self):
        return self.d * self.n_signals

    def check_caps(self, max_n=MAX_RECEIVERS, max_m=MAX_TYPES, max_actions=MAX_ACTIONS,
                   max_d=MAX_STATES):
        if self.n > max_n or self.m > max_m or self.n_actions > max_actions or self.d > max_d:
            raise InstanceValidationError(
                f"instance (n={self.n}, m={self.m}, |A|={self.n_actions}, d={self.d}) exceeds caps")

    # -- index tables ----------------------------------------------------
    @cached_property
    def private_digits(self):
        """``(|A|^m, m)``: recommended action per type of each private signal."""
        return np.array(np.unravel_index(np.arange(self.n_private_signals),
                                         (self.n_actions,) * self.m)).T.reshape(-1, self.m)

    @cached_property
    def signal_blocks(self):
        """``(|A|^(mn), n)``: private signal of every receiver in each joint signal."""
        return np.array(np.unravel_index(np.arange(self.n_signals),
                                         (self.n_private_signals,) * self.n)).T.reshape(-1, self.n)

    @cached_property
    def sender_tensor(self):
        if isinstance(self.sender_util, SetFunction):
            table = self.sender_util.table()
            shape = (2,) * self.n
            idx = np.array(np.unravel_index(np.arange(2 ** self.n), shape)).T
            masks = (idx * (1 << np.arange(self.n))).sum(axis=1)
            return np.moveaxis(table[:, masks].reshape((self.d,) + shape), 0, -1)
        return self.sender_util

    def all_profiles(self):
        return [tuple(k) for k in product(range(self.m), repeat=self.n)]

    def recommended_actions(self, profile):
        """``(|A|^(mn), n)``: action recommended to each receiver, given its
        type in ``profile``, for every joint signal."""
        k = np.asarray(profile, dtype=int)
        return self.private_digits[self.signal_blocks, k[None, :]]

    # -- JSON ------------------------------------------------------------
    def to_json(self):
        if isinstance(self.sender_util, SetFunction):
            sender = {"kind": "set_function", "data": self.sender_util.to_json()}
        else:
            sender = {"kind": "tensor", "data": self.sender_util.tolist()}
        return {"n": self.n, "states": self.d, "prior": self.prior.tolist(),
                "actions": self.n_actions, "types": self.m,
                "receiver_utils": self.receiver_utils.tolist(), "sender_util": sender}

    @classmethod
    def from_json(cls, data):
        try:
            n, d = int(data["n"]), int(data["states"])
            U = np.asarray(data["receiver_utils"], dtype=float)
            if U.shape[:2] != (n, int(data["types"])) or U.shape[2] != int(data["actions"]) \
                    or U.shape[3] != d:
                raise InstanceValidationError("receiver_utils shape disagrees with n/types/actions/states")
            sender = data["sender_util"]
            if sender["kind"] == "tensor":
                S = np.asarray(sender["data"], dtype=float)
            elif sender["kind"] == "set_function":
                S = SetFunction.from_json(sender["data"], n)
            else:
                raise InstanceValidationError(f"unknown sender_util kind {sender['kind']!r}")
            return cls(np.asarray(data["prior"], dtype=float), U, S)
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceValidationError(f"malformed instance: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# -- beliefs and best responses -------------------------------------------

def posterior(marginal_scheme, prior, signal):
    """Bayes update of ``prior`` after ``signal`` under a ``(d, S)`` scheme."""
    joint = np.asarray(prior, dtype=float) * np.asarray(marginal_scheme, dtype=float)[:, signal]
    total = joint.sum()
    if total <= 1e-12:
        raise ZeroProbabilitySignal(f"signal {signal} has probability {total:.3g}")
    return joint / total


def best_response(instance, xi, r, k, sender_values=None, tol=TOL_TIE):
    """Maximisers of the expected utility of type ``k`` of receiver ``r``
    under posterior ``xi``.

    Ties are ordered by ``sender_values`` (descending, when given), then by
    action index.
    """
    vals = instance.receiver_utils[r, k] @ np.asarray(xi, dtype=float)
    best = np.flatnonzero(vals >= vals.max() - tol)
    if sender_values is None:
        return [int(a) for a in best]
    sv = np.asarray(sender_values, dtype=float)
    return [int(a) for a in sorted(best, key=lambda a: (-sv[a], a))]


def prior_best_actions(instance):
    """``(n, m)`` action each type picks without information (lowest index
    among ties)."""
    vals = instance.receiver_utils @ instance.prior
    return np.argmax(vals >= vals.max(axis=2, keepdims=True) - TOL_TIE, axis=2)


# -- schemes ---------------------------------------------------------------

def as_table(instance, scheme):
    return np.asarray(scheme, dtype=float).reshape(instance.d, instance.n_signals)


def marginal_of(instance, scheme, r):
    """``(d, |A|^m)`` marginal scheme of receiver ``r``."""
    phi = as_table(instance, scheme)
    out = np.zeros((instance.d, instance.n_private_signals))
    np.add.at(out.T, instance.signal_blocks[:, r], phi.T)
    return out


def uninformative_scheme(instance):
    """Scheme recommending each type its prior-best action in every state."""
    b = prior_best_actions(instance)
    private = [int(np.ravel_multi_index(tuple(b[r]), (instance.n_actions,) * instance.m))
               for r in range(instance.n)]
    s = int(np.ravel_multi_index(tuple(private), (instance.n_private_signals,) * instance.n))
    phi = np.zeros((instance.d, instance.n_signals))
    phi[:, s] = 1.0
    return phi.ravel()


def build_persuasive_polytope(instance):
    """Direct persuasive schemes.

    For every receiver ``r``, private signal ``s_r``, type ``k`` and
    deviation ``a``, the recommended action ``s_r[k]`` must be at least as
    good as ``a`` against the (unnormalised) posterior induced by ``s_r``;
    plus per-state normalisation and nonnegativity.
    """
    d, S = instance.d, instance.n_signals
    mu = instance.prior
    rows = []
    for r in range(instance.n):
        block = instance.signal_blocks[:, r]
        for sr, rec in enumerate(instance.private_digits):
            member = block == sr
            for k in range(instance.m):
                u = instance.receiver_utils[r, k]
                for a in range(instance.n_actions):
                    if a == rec[k]:
                        continue
                    gain = mu * (u[a] - u[rec[k]])
                    row = np.zeros((d, S))
                    row[:, member] = gain[:, None]
                    rows.append(row.ravel())
    A_ub = np.array(rows) if rows else np.zeros((0, d * S))
    A_eq = np.kron(np.eye(d), np.ones((1, S)))
    P = Polytope.from_constraints(d * S, A_ub, np.zeros(len(rows)), A_eq, np.ones(d), lower=0.0)
    if not P.contains(uninformative_scheme(instance), TOL_FEAS):
        raise AssertionError("the uninformative scheme must be persuasive")
    return P


def persuasiveness_violation(instance, scheme):
    """Largest violation of the aggregate obedience rows (``<= 0`` when
    persuasive), computed directly from the marginals."""
    worst = -np.inf
    mu = instance.prior
    for r in range(instance.n):
        marg = marginal_of(instance, scheme, r)
        for k in range(instance.m):
            u = instance.receiver_utils[r, k]
            rec = instance.private_digits[:, k]
            follow = np.einsum("t,ts,st->", mu, marg, u[rec])
            for a in range(instance.n_actions):
                dev = np.einsum("t,ts,t->", mu, marg, u[a])
                worst = max(worst, dev - follow)
    return float(worst)


def deviation_gain(instance, scheme, threshold=1e-12):
    """Largest ex-ante gain any receiver type can get by not following a
    recommendation, over private signals of positive probability.  Schemes
    may be stacked along leading dimensions."""
    phi = np.asarray(scheme, dtype=float)
    batch = phi.shape[:-1] if phi.shape[-1] == instance.scheme_dim else phi.shape[:-2]
    phi = phi.reshape(batch + (instance.d, instance.n_signals))
    mu = instance.prior
    worst = np.zeros(batch)
    digits = instance.private_digits
    for r in range(instance.n):
        onehot = np.zeros((instance.n_signals, instance.n_private_signals))
        onehot[np.arange(instance.n_signals), instance.signal_blocks[:, r]] = 1.0
        marg = (phi @ onehot) * mu[:, None]                       # (..., d, S_r)
        live = marg.sum(axis=-2) > threshold
        for k in range(instance.m):
            vals = np.swapaxes(marg, -1, -2) @ instance.receiver_utils[r, k].T   # (..., S_r, A)
            follow = np.take_along_axis(vals, np.broadcast_to(
                digits[:, k, None], vals.shape[:-1] + (1,)), axis=-1)[..., 0]
            gain = np.where(live, vals.max(axis=-1) - follow, 0.0)
            worst = np.maximum(worst, gain.max(axis=-1))
    return float(worst) if not batch else worst


# -- sender utility and nu maps --------------------------------------------

def sender_utility_vector(instance, profile):
    """``c`` with ``u_s(phi, k) = c . phi`` for type profile ``k``."""
    acts = instance.recommended_actions(profile)
    vals = instance.sender_tensor[tuple(acts.T)]
    return (instance.prior[None, :] * vals).T.ravel()


def sender_utility_direct(instance, scheme, profile):
    """Expected sender utility when every receiver follows its recommendation."""
    return float(sender_utility_vector(instance, profile) @ np.asarray(scheme, dtype=float))


def canonical_profiles(instance, profiles=None):
    """Sorted list of type profiles (all of them by default)."""
    if profiles is None:
        return instance.all_profiles()
    out = sorted({tuple(int(x) for x in np.atleast_1d(k)) for k in profiles})
    for k in out:
        if len(k) != instance.n or min(k) < 0 or max(k) >= instance.m:
            raise ValueError(f"invalid type profile {k}")
    return out


def sender_utility_matrix(instance, profiles=None):
    profiles = canonical_profiles(instance, profiles)
    return np.array([sender_utility_vector(instance, k) for k in profiles])


def build_nu_matrix(instance, profiles=None):
    """``M`` with ``M phi = [-u_s(phi, k)]_k`` over the given profiles."""
    return -sender_utility_matrix(instance, profiles)


def loss_matrix(instance, profiles=None):
    """Rows ``mu_theta (1 - u_s)``: on normalised schemes ``(M phi)_k =
    1 - u_s(phi, k)``, a loss in ``[0, 1]``."""
    C = sender_utility_matrix(instance, profiles)
    shift = np.repeat(instance.prior, instance.n_signals)
    return shift[None, :] - C


def best_fixed_in_hindsight(instance, type_sequence, polytope=None, profiles=None):
    """Best persuasive scheme against a sequence of type profiles.

    Returns ``(total utility, scheme)``.
    """
    profiles = canonical_profiles(instance, profiles)
    lookup = {k: i for i, k in enumerate(profiles)}
    counts = np.zeros(len(profiles))
    for k in type_sequence:
        counts[lookup[tuple(int(x) for x in np.atleast_1d(k))]] += 1
    if counts.sum() == 0:
        raise ValueError("type sequence is empty")
    P = polytope if polytope is not None else build_persuasive_polytope(instance)
    C = sender_utility_matrix(instance, profiles)
    sol = solve_lp(counts @ C, P, "Max")
    return sol.value, sol.point


# -- protocol simulation ----------------------------------------------------

def receiver_actions(instance, scheme, signal, profile):
    """Actions chosen after joint ``signal`` by receivers of types ``profile``.

    Each receiver keeps to its recommendation if it is a best response;
    among the product of best-response sets the profile maximising the
    sender's conditional utility is chosen (ties: recommended profile, then
    lexicographic).
    """
    phi = as_table(instance, scheme)
    rec = instance.recommended_actions(profile)[signal]
    sets = []
    for r in range(instance.n):
        xi = posterior(marginal_of(instance, phi, r), instance.prior, instance.signal_blocks[signal, r])
        br = best_response(instance, xi, r, profile[r])
        sets.append(br)
    weights = instance.prior * phi[:, signal]
    tensor = instance.sender_tensor
    best, best_val = tuple(rec), -np.inf
    follow_ok = all(rec[r] in sets[r] for r in range(instance.n))
    if follow_ok:
        best_val = float(tensor[tuple(rec)] @ weights)
    for acts in product(*sets):
        val = float(tensor[acts] @ weights)
        if val > best_val + TOL_TIE:
            best, best_val = acts, val
    return tuple(int(a) for a in best)


def simulate_round(instance, scheme, profile, u_state, u_signal):
    """One round of the protocol from two uniforms.

    Returns ``(theta, signal, actions, sender utility)``.
    """
    phi = as_table(instance, scheme)
    theta = min(int(np.searchsorted(np.cumsum(instance.prior), u_state, side="right")), instance.d - 1)
    row = np.clip(phi[theta], 0.0, None)
    cdf = np.cumsum(row / row.sum())
    signal = min(int(np.searchsorted(cdf, u_signal, side="right")), instance.n_signals - 1)
    while row[signal] <= 0:
        signal -= 1
    acts = receiver_actions(instance, phi, signal, profile)
    return theta, signal, acts, float(instance.sender_tensor[acts + (theta,)])


def protocol_utility(instance, scheme, profile):
    """Exact expected sender utility of the protocol (receivers best respond,
    ties in favour of the sender), by enumeration of signals."""
    phi = as_table(instance, scheme)
    total = 0.0
    mass = instance.prior @ phi
    for s in np.flatnonzero(mass > 1e-12):
        acts = receiver_actions(instance, phi, s, profile)
        total += float(instance.sender_tensor[acts] @ (instance.prior * phi[:, s]))
    return total
