"""Environments: each runs one learner against one oblivious adversary and
returns a per-round trace.

Receivers and attackers are simulated here, outside the learners.  In
partial-feedback runs the learner only receives the scalar returned by the
``observe`` hook (one minus the realized sender utility); the type index
stays on the environment side.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InstanceValidationError, PersuasionError
from ..persuasion import (PersuasionInstance, best_response, build_persuasive_polytope,
                          canonical_profiles, deviation_gain, loss_matrix, posterior,
                          simulate_round)
from ..regret import BANDIT, OGD, FiniteLossProblem, bandit_feedback_bound, \
    full_feedback_bound, simulate, synthetic_problem
from ..rng import stream_uniforms
from ..type_reporting import (DUAL_ELLIPSOID, MenuLayout, all_type_profiles, algorithm2_bound,
                              best_menu_in_hindsight, g_value_primal, ic_gain, run_algorithm2,
                              single_type_reporting_learner, truthful_reports)
from .adversaries import adversary_sequence, battery_kind
from .instances import commitment_value, generate_instance, random_security_game, simplex_grid


@dataclass
class Trace:
    """Per-round records of one run (``T`` rounds).

    ``utility`` is the realized sender utility, ``expected`` its expectation
    over the state, the signals and the learner's own randomness in that
    round, and ``comparator`` the expected utility of the best fixed
    decision in hindsight in the same round.
    """

    decisions: np.ndarray
    types: list
    states: np.ndarray
    utility: np.ndarray
    expected: np.ndarray
    comparator: np.ndarray
    bound: float
    bound_name: str
    extras: dict = field(default_factory=dict)

    @property
    def regret(self):
        return float(self.comparator.sum() - self.expected.sum())


def load_instance(cfg):
    if "path" in cfg.instance:
        try:
            return PersuasionInstance.load(cfg.instance["path"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InstanceValidationError(f"cannot load instance {cfg.instance['path']}: "
                                          f"{exc}") from exc
    params = dict(cfg.instance["generate"])
    seed = int(params.pop("seed", cfg.seed))
    return generate_instance(params, seed)


def type_sequence(cfg, n_options):
    kind = cfg.adversary.get("kind") or battery_kind(cfg.seed)
    seed = int(cfg.adversary.get("seed", cfg.seed))
    return adversary_sequence(kind, n_options, cfg.horizon, seed)


def _bound(cfg, D):
    if cfg.algorithm == OGD:
        return full_feedback_bound(D, cfg.horizon), "sqrt(D T)"
    return bandit_feedback_bound(D, cfg.horizon), "16 D^1.5 sqrt(T log T)"


def _comparator(problem, seq):
    counts = np.bincount(seq, minlength=problem.D).astype(float)
    _, i = problem.best_fixed(counts)
    return 1.0 - problem.image.vertices[i][seq]


def _finite_loss_run(cfg, problem, seq, observe=None):
    sim = simulate(problem, seq[None, :], cfg.algorithm, [cfg.seed], record_plays=True,
                   observe=observe)
    return sim, sim.plays[0]


# -- environments ------------------------------------------------------------

def synthetic_environment(cfg):
    D = int(cfg.params.get("D", 3))
    N = int(cfg.params.get("N", D + 1))
    problem = synthetic_problem(D, N, int(cfg.params.get("seed", cfg.seed)))
    seq = type_sequence(cfg, D)
    sim, plays = _finite_loss_run(cfg, problem, seq)
    bound, name = _bound(cfg, D)
    return Trace(plays, [str(d) for d in seq], np.full(cfg.horizon, -1),
                 1.0 - sim.realized_loss[0], 1.0 - sim.expected_loss[0],
                 _comparator(problem, seq), bound, name)


def persuasion_environment(cfg, instance=None):
    """Single receiver (every type is a loss) or several receivers with a
    known set of type profiles, under full or partial feedback."""
    inst = instance or load_instance(cfg)
    if cfg.environment == "single_receiver":
        if inst.n != 1:
            raise PersuasionError("single_receiver environment needs n = 1")
        profiles = canonical_profiles(inst)
    else:
        profiles = canonical_profiles(inst, cfg.profiles if cfg.profiles is not None
                                      else _default_profiles(inst, cfg.seed))
    P = build_persuasive_polytope(inst)
    problem = FiniteLossProblem.from_linear(loss_matrix(inst, profiles), P)
    seq = type_sequence(cfg, len(profiles))
    fb = ProtocolFeedback(inst, profiles, [cfg.seed], cfg.horizon)
    sim, plays = _finite_loss_run(cfg, problem, seq, fb)
    bound, name = _bound(cfg, len(profiles))
    extras = {"max_deviation_gain": fb.worst_gain,
              "max_play_violation": float(max(P.violation(x) for x in plays)),
              "profiles": [list(k) for k in profiles]}
    return Trace(plays, ["-".join(map(str, profiles[d])) for d in seq], fb.states[0],
                 fb.realized[0], 1.0 - sim.expected_loss[0], _comparator(problem, seq), bound,
                 name, extras)


class ProtocolFeedback:
    """``observe`` hook for :func:`simulate`: plays the committed schemes
    against simulated receivers and returns one minus the realized sender
    utility.  The learner only ever sees this scalar.

    Rows are independent runs with their own ``protocol`` streams.  The
    largest deviation gain of any committed scheme is tracked as well.
    """

    def __init__(self, instance, profiles, seeds, horizon):
        self.instance = instance
        self.profiles = profiles
        self.u = np.stack([stream_uniforms(s, "protocol", horizon) for s in seeds])
        self.states = np.zeros((len(seeds), horizon), dtype=int)
        self.realized = np.zeros((len(seeds), horizon))
        self.worst_gain = 0.0

    def __call__(self, x, d, t):
        out = np.zeros(len(x))
        self.worst_gain = max(self.worst_gain, float(np.max(deviation_gain(self.instance, x))))
        for i, scheme in enumerate(x):
            theta, _, _, util = simulate_round(self.instance, scheme, self.profiles[int(d[i])],
                                               self.u[i, t, 0], self.u[i, t, 1])
            self.states[i, t], self.realized[i, t] = theta, util
            out[i] = 1.0 - util
        return out


def _default_profiles(inst, seed):
    """Three distinct type profiles (all of them if there are fewer)."""
    from ..rng import make_rng
    allp = inst.all_profiles()
    if len(allp) <= 3:
        return allp
    idx = make_rng(seed, "profiles").choice(len(allp), size=3, replace=False)
    return [allp[i] for i in sorted(idx)]


def _follow_or_best(inst, marginal, r, k, a, sender_values=None):
    """Action of receiver ``r`` of type ``k`` recommended ``a`` under the
    marginal scheme ``(d, |A|)``: the recommendation if it is a best
    response, otherwise the best response the sender prefers."""
    xi = posterior(marginal, inst.prior, a)
    br = best_response(inst, xi, r, k, sender_values)
    return a if a in br else br[0]


def type_reporting_environment(cfg, instance=None):
    inst = instance or load_instance(cfg)
    ic_tol = float(cfg.tolerances.get("ic", 1e-6))
    u = stream_uniforms(cfg.seed, "protocol", cfg.horizon)
    lay = MenuLayout.of(inst)
    states = np.zeros(cfg.horizon, dtype=int)
    realized = np.zeros(cfg.horizon)
    cdf_prior = np.cumsum(inst.prior)
    if inst.n == 1:
        if cfg.algorithm != OGD:
            raise PersuasionError("a single receiver uses the finite-loss learner (OgdFull)")
        from ..type_reporting import single_type_reporting_problem
        problem = single_type_reporting_problem(inst)
        seq = type_sequence(cfg, inst.m)
        run = single_type_reporting_learner(inst, seq[None, :], [cfg.seed], problem=problem,
                                            keep_menus=True)
        menus = run.menus[0].reshape((cfg.horizon,) + lay.menu_shape)
        us = inst.sender_tensor                                    # (A, d)
        for t, k in enumerate(seq):
            if truthful_reports(inst, menus[t].ravel(), (int(k),)) != (int(k),):
                raise PersuasionError(f"receiver misreports in round {t}")
            phi = menus[t, 0, k]                                   # (d, A)
            theta = min(int(np.searchsorted(cdf_prior, u[t, 0], side="right")), inst.d - 1)
            row = np.clip(phi[theta], 0, None)
            a = min(int(np.searchsorted(np.cumsum(row / row.sum()), u[t, 1], side="right")),
                    inst.n_actions - 1)
            while row[a] <= 0:
                a -= 1
            weights = inst.prior * phi[:, a]
            act = _follow_or_best(inst, phi, 0, int(k), a, us @ weights)
            states[t], realized[t] = theta, us[act, theta]
        expected = 1.0 - run.sim.expected_loss[0]
        comp = _comparator(problem, seq)
        bound, name = full_feedback_bound(inst.m, cfg.horizon), "sqrt(m T)"
        extras = {"max_ic_gain": run.ic_gain}
        return Trace(menus.reshape(cfg.horizon, -1), [str(k) for k in seq], states, realized,
                     expected, comp, bound, name, extras)
    if cfg.algorithm != "FTRL":
        raise PersuasionError("several receivers use the FTRL learner")
    profiles = all_type_profiles(inst)
    seq = [profiles[i] for i in type_sequence(cfg, len(profiles))]
    feature = DUAL_ELLIPSOID if DUAL_ELLIPSOID in cfg.features else None
    run = run_algorithm2(inst, seq, feature=feature, keep=True)
    gain = float(np.max(ic_gain(inst, run.menus)))
    if gain > ic_tol:
        raise PersuasionError(f"committed menu admits a misreport gain of {gain:.2e}")
    hind, best_menu = best_menu_in_hindsight(inst, seq)
    best_vals = {k: g_value_primal(inst, best_menu, k)[0] for k in set(seq)}
    S = inst.sender_tensor.reshape(-1, inst.d)                     # (|A|^n, d)
    digits = np.array(np.unravel_index(np.arange(S.shape[0]), (inst.n_actions,) * inst.n)).T
    menus = run.menus.reshape((cfg.horizon,) + lay.menu_shape)
    for t, k in enumerate(seq):
        scheme = run.schemes[t]
        theta = min(int(np.searchsorted(cdf_prior, u[t, 0], side="right")), inst.d - 1)
        row = np.clip(scheme[theta], 0, None)
        j = min(int(np.searchsorted(np.cumsum(row / row.sum()), u[t, 1], side="right")),
                row.size - 1)
        while row[j] <= 0:
            j -= 1
        acts = [_follow_or_best(inst, menus[t, r, kr], r, kr, int(digits[j, r]))
                for r, kr in enumerate(k)]
        idx = int(np.ravel_multi_index(tuple(acts), (inst.n_actions,) * inst.n))
        states[t], realized[t] = theta, S[idx, theta]
    comp = np.array([best_vals[k] for k in seq])
    extras = {"max_ic_gain": gain, "hindsight_value": hind,
              "feature": feature, "mean_round_seconds": float(run.round_times.mean())}
    return Trace(run.menus, ["-".join(map(str, k)) for k in seq], states, realized, run.values,
                 comp, algorithm2_bound(inst, cfg.horizon), "n d |A| sqrt(m T)", extras)


def security_game_environment(cfg):
    """Defender against attacker types; decisions are coverage vectors on a
    grid of the simplex and the finite-loss problem is the hull of their
    loss vectors.  The ``state`` column holds the attacked target."""
    N = int(cfg.params.get("targets", 3))
    D = int(cfg.params.get("types", 2))
    res = int(cfg.params.get("resolution", 64))
    game = random_security_game(N, D, int(cfg.params.get("seed", cfg.seed)))
    grid = simplex_grid(N, res)
    problem = FiniteLossProblem.from_points(grid, game.losses(grid))
    seq = type_sequence(cfg, D)
    sim, plays = _finite_loss_run(cfg, problem, seq)
    targets = game.attacked(plays)[np.arange(cfg.horizon), seq]
    comp = _comparator(problem, seq)
    weights = np.bincount(seq, minlength=D) / cfg.horizon
    continuous = commitment_value(game, weights)
    disc = max(0.0, continuous - float(comp.mean()))
    bound, name = _bound(cfg, D)
    extras = {"discretization_error": disc, "grid_points": int(len(grid)),
              "hull_vertices": int(len(problem.image.vertices))}
    return Trace(plays, [str(d) for d in seq], targets, 1.0 - sim.realized_loss[0],
                 1.0 - sim.expected_loss[0], comp, bound, name, extras)


ENVIRONMENT_RUNNERS = {
    "synthetic": synthetic_environment,
    "single_receiver": persuasion_environment,
    "multi_receiver": persuasion_environment,
    "type_reporting": type_reporting_environment,
    "security_game": security_game_environment,
}


def run_environment(cfg):
    return ENVIRONMENT_RUNNERS[cfg.environment](cfg)


__all__ = ["Trace", "ProtocolFeedback", "run_environment", "load_instance", "type_sequence",
           "BANDIT", "OGD"]
