"""Learners for persuasion with type reporting.

With one receiver the sender runs the finite-loss reduction over the
extended menu polytope: the loss of type ``k`` is ``1 - u_s(phi^k)``, one
loss per type, and the sender sees the reported type (full feedback).

With several receivers the sender runs FTRL over menus; each round the
committed menu and the reported profile fix a joint scheme through the
marginal-consistency LP.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import PersuasionError
from ..regret import OGD, FiniteLossProblem, simulate
from .ftrl import LiftedFtrl, MenuProjector, all_type_profiles, best_menu_in_hindsight, \
    ftrl_update_dual_ellipsoid
from .menus import MenuLayout, build_extended_polytope, ic_gain, single_receiver_loss_matrix, \
    truthful_reports
from .value import g_value_dual_ellipsoid, g_value_primal

IC_TOL = 1e-6
DUAL_ELLIPSOID = "dual-ellipsoid"


# -- one receiver ------------------------------------------------------------

def single_type_reporting_problem(instance):
    """Finite-loss problem over the extended menu polytope (``D = m``)."""
    return FiniteLossProblem.from_linear(single_receiver_loss_matrix(instance),
                                         build_extended_polytope(instance))


@dataclass
class SingleReceiverRun:
    sim: object                 # SimulationResult of the reduction
    ic_gain: float              # worst misreport gain over committed menus
    menus: np.ndarray | None = None

    @property
    def regret(self):
        return self.sim.regret


def single_type_reporting_learner(instance, type_sequences, seeds, problem=None,
                                  keep_menus=False):
    """Run the reduction with full feedback for several seeds.

    ``type_sequences`` is ``(S, T)``.  Every committed menu is checked by a
    simulated receiver evaluating all menu entries; a menu that lets some
    type gain more than ``1e-6`` by misreporting raises
    :class:`PersuasionError`.
    """
    if instance.n != 1:
        raise ValueError("single-receiver learner")
    problem = problem or single_type_reporting_problem(instance)
    sim = simulate(problem, type_sequences, OGD, seeds, record_plays=True)
    lay = MenuLayout.of(instance)
    menus = sim.plays[..., : lay.n_menu]
    gain = float(np.max(ic_gain(instance, menus.reshape(-1, lay.n_menu))))
    if gain > IC_TOL:
        raise PersuasionError(f"committed menu admits a misreport gain of {gain:.2e}")
    sim.plays = None
    return SingleReceiverRun(sim, gain, menus if keep_menus else None)


# -- several receivers ---------------------------------------------------------

@dataclass
class Algorithm2State:
    instance: object
    horizon: int
    alpha: float
    menu: np.ndarray
    counts: np.ndarray
    t: int = 0
    feature: str | None = None
    solver: object = field(default=None, repr=False)
    projector: object = field(default=None, repr=False)

    @property
    def profiles(self):
        return all_type_profiles(self.instance)


def init_algorithm2(instance, horizon, alpha=None, feature=None):
    """Initial state: ``alpha = sqrt(m / T)`` unless given; the first menu
    is the FTRL menu of the empty history (the minimum-norm menu)."""
    alpha = float(np.sqrt(instance.m / horizon)) if alpha is None else float(alpha)
    counts = np.zeros(instance.m ** instance.n)
    if feature == DUAL_ELLIPSOID:
        projector = MenuProjector(instance)
        menu = ftrl_update_dual_ellipsoid(instance, counts, alpha, projector=projector).menu
        return Algorithm2State(instance, horizon, alpha, menu, counts, 0, feature, None, projector)
    if feature is not None:
        raise ValueError(f"unknown feature {feature!r}")
    solver = LiftedFtrl(instance, alpha)
    menu = solver.solve(counts, certify=False).menu
    return Algorithm2State(instance, horizon, alpha, menu, counts, 0, None, solver)


def algorithm2_round(state, profile, check_ic=True, certify=False):
    """One round: commit the menu, receive reports, pick the joint scheme,
    update the menu.  Returns ``(joint scheme, g value, state)``; the state
    is updated in place."""
    inst = state.instance
    profile = tuple(int(k) for k in profile)
    if check_ic:
        gain = ic_gain(inst, state.menu)
        if gain > IC_TOL or truthful_reports(inst, state.menu, profile) != profile:
            raise PersuasionError(f"menu admits a misreport gain of {gain:.2e}")
    if state.feature == DUAL_ELLIPSOID:
        value, scheme = g_value_dual_ellipsoid(inst, state.menu, profile, return_scheme=True)
    else:
        value, scheme = g_value_primal(inst, state.menu, profile)
    state.counts[state.profiles.index(profile)] += 1
    if state.feature == DUAL_ELLIPSOID:
        res = ftrl_update_dual_ellipsoid(inst, state.counts, state.alpha,
                                         projector=state.projector)
    else:
        res = state.solver.solve(state.counts, certify=certify)
        if certify and res.residual > 1e-6:
            raise PersuasionError(f"FTRL certificate residual {res.residual:.2e}")
    state.menu = res.menu
    state.t += 1
    return scheme, value, state


@dataclass
class Algorithm2Run:
    values: np.ndarray          # g^{k_t}(phi_t) per round
    hindsight: float            # max over menus of sum_t g^{k_t}
    schemes: list | None = None
    menus: np.ndarray | None = None
    round_times: np.ndarray | None = None

    @property
    def regret(self):
        return self.hindsight - float(self.values.sum())


def run_algorithm2(instance, sequence, horizon=None, alpha=None, feature=None,
                   keep=False, check_ic=True):
    """Run Algorithm 2 on a sequence of type profiles."""
    seq = [tuple(int(k) for k in p) for p in sequence]
    T = len(seq) if horizon is None else int(horizon)
    state = init_algorithm2(instance, T, alpha, feature)
    values = np.zeros(len(seq))
    schemes, menus, times = [], [], np.zeros(len(seq))
    for t, k in enumerate(seq):
        if keep:
            menus.append(state.menu.copy())
        start = time.perf_counter()
        scheme, values[t], state = algorithm2_round(state, k, check_ic=check_ic)
        times[t] = time.perf_counter() - start
        if keep:
            schemes.append(scheme)
    hindsight = best_menu_in_hindsight(instance, seq)[0] if seq else 0.0
    return Algorithm2Run(values, hindsight, schemes if keep else None,
                         np.array(menus) if keep else None, times)


def algorithm2_bound(instance, T):
    return instance.n * instance.d * instance.n_actions * np.sqrt(instance.m * T)
