import numpy as np
import pytest

from online_persuasion.geometry import Polytope
from online_persuasion.harness import adversary_sequence, battery_kind
from online_persuasion.regret import (BANDIT, OGD, FiniteLossProblem, algorithm1_round,
                                      bandit_feedback_bound, full_feedback_bound, init_learner,
                                      ogd_full_step, play_decision, simulate, synthetic_problem)
from online_persuasion.rng import seed_list


def test_bounds_formulas():
    assert full_feedback_bound(3, 100) == pytest.approx(np.sqrt(300))
    assert bandit_feedback_bound(2, 1024) == pytest.approx(16 * 2 ** 1.5 * np.sqrt(1024 * np.log(1024)))


def test_constant_adversary_full_feedback():
    prob = synthetic_problem(3, 4, seed=3)
    T = 10_000
    seq = np.full((1, T), 1)
    res = simulate(prob, seq, OGD, [0])
    assert res.regret[0] <= np.sqrt(3 * T)


def test_single_loss_moves_toward_minimiser():
    prob = synthetic_problem(1, 3, seed=1)
    st = init_learner(prob, OGD, 200, 0)
    vals = [st.z[0]]
    for _ in range(50):
        st = ogd_full_step(st, 0)
        vals.append(st.z[0])
    assert np.all(np.diff(vals) <= 1e-12)


def test_alternating_losses_average_iterate():
    # segment between (1, 0.2) and (0.4, 0.9); under alternating losses the
    # late iterates settle at the best point for the summed loss
    pts = np.array([[1.0, 0.2], [0.4, 0.9]])
    prob = FiniteLossProblem.from_points(np.eye(2), pts)
    T = 4000
    seq = np.tile([0, 1], T // 2)[None, :]
    st = init_learner(prob, OGD, T, 0)
    zs = []
    for d in seq[0]:
        zs.append(st.z)
        st = ogd_full_step(st, d)
    avg = np.mean(zs[T // 2:], axis=0)
    # grid search for the minimiser of z0 + z1 over the segment
    lam = np.linspace(0, 1, 100001)
    seg = np.outer(1 - lam, pts[0]) + np.outer(lam, pts[1])
    best = seg[np.argmin(seg.sum(axis=1))]
    assert np.linalg.norm(avg - best) < 1e-2


def test_batched_matches_single_rounds():
    prob = synthetic_problem(2, 3, seed=5)
    T = 64
    seq = adversary_sequence("iid", 2, T, 9)
    res = simulate(prob, seq[None, :], OGD, [11], record_plays=True)
    st = init_learner(prob, OGD, T, 11)
    for t, d in enumerate(seq):
        x, st = algorithm1_round(prob, st, d)
        np.testing.assert_allclose(x, res.plays[0, t], atol=1e-8)


def test_bandit_single_matches_batched():
    prob = synthetic_problem(2, 3, seed=5)
    T = 40
    seq = adversary_sequence("periodic", 2, T, 4)
    res = simulate(prob, seq[None, :], BANDIT, [3], record_plays=True)
    st = init_learner(prob, BANDIT, T, 3)
    for t, d in enumerate(seq):
        x, st = algorithm1_round(prob, st, lambda x, d=d: prob.losses(x)[d])
        np.testing.assert_allclose(x, res.plays[0, t], atol=1e-7)


def test_bandit_constant_single_loss():
    prob = synthetic_problem(1, 3, seed=2)
    T = 2000
    res = simulate(prob, np.zeros((1, T), dtype=int), BANDIT, [1])
    # the played point is unbiased for the center: realized and expected agree
    gap = abs(res.realized_loss.mean() - res.expected_loss.mean())
    assert gap < 4 * res.realized_loss.std() / np.sqrt(T) + 1e-9


def test_bandit_plays_feasible():
    prob = synthetic_problem(3, 4, seed=3)
    X = prob.decision_polytope
    res = simulate(prob, adversary_sequence("iid", 3, 3000, 1)[None, :], BANDIT, [5],
                   record_plays=True)
    assert max(X.violation(x) for x in res.plays[0]) <= 1e-8


def test_bandit_bound_d3():
    prob = synthetic_problem(3, 4, seed=3)
    T = 2 ** 12
    seeds = seed_list(0, 8)
    seq = np.stack([adversary_sequence(battery_kind(i), 3, T, s) for i, s in enumerate(seeds)])
    res = simulate(prob, seq, BANDIT, seeds)
    assert res.regret.mean() <= bandit_feedback_bound(3, T)


def test_point_set_sampling_is_unbiased():
    # expected loss of the sampled atom equals the iterate (Monte Carlo, 3 sigma)
    rng = np.random.default_rng(0)
    pts = rng.random((10, 2))
    prob = FiniteLossProblem.from_points(np.arange(10)[:, None], pts)
    w = rng.dirichlet(np.ones(len(prob.image.vertices)))
    z = w @ prob.image.vertices
    n = 100_000
    atoms = np.array([play_decision(prob, z, 7, t)[1] for t in range(n)])
    mean, sd = atoms.mean(axis=0), atoms.std(axis=0) / np.sqrt(n)
    assert np.all(np.abs(mean - z) <= 3 * sd + 1e-12)


def test_regret_chain_on_point_set():
    # realized regret of the sampled plays concentrates around the expected regret
    rng = np.random.default_rng(1)
    pts = rng.random((15, 3))
    prob = FiniteLossProblem.from_points(np.arange(15)[:, None], pts)
    T = 3000
    seeds = seed_list(1, 16)
    seq = np.stack([adversary_sequence("iid", 3, T, s) for s in seeds])
    res = simulate(prob, seq, OGD, seeds)
    diff = res.realized_regret - res.regret
    assert abs(diff.mean()) <= 4 * diff.std() / np.sqrt(len(seeds)) + 1.0
    assert np.all(res.regret <= full_feedback_bound(3, T))


def test_singleton_decision_zero_regret():
    X = Polytope.from_constraints(2, None, None, np.eye(2), np.array([0.3, 0.6]))
    prob = FiniteLossProblem.from_linear(np.array([[1.0, 0.0], [0.0, 1.0]]), X)
    res = simulate(prob, adversary_sequence("iid", 2, 100, 0)[None, :], OGD, [0],
                   record_plays=True)
    assert res.regret[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(res.plays[0], np.tile([0.3, 0.6], (100, 1)), atol=1e-9)
