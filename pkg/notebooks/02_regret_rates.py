"""
Regret rates of the two learners
================================

Full-feedback projected gradient against the bandit learner on a small
synthetic problem.  The log-log slope of mean regret against the horizon is
printed next to each bound.
"""
import numpy as np

from online_persuasion import BANDIT, OGD, simulate
from online_persuasion.harness import adversary_sequence, battery_kind
from online_persuasion.regret import (bandit_feedback_bound, full_feedback_bound, regret_slope,
                                      synthetic_problem)
from online_persuasion.rng import seed_list

D = 3
prob = synthetic_problem(D, D + 1, seed=0)
seeds = seed_list(0, 8)
horizons = [256, 1024, 4096]

for algo, bound in ((OGD, full_feedback_bound), (BANDIT, bandit_feedback_bound)):
    means = []
    for T in horizons:
        seqs = np.stack([adversary_sequence(battery_kind(i), D, T, s) for i, s in enumerate(seeds)])
        means.append(simulate(prob, seqs, algo, seeds).regret.mean())
        print(f"{algo:>14} T={T:5d}  mean regret {means[-1]:8.2f}  bound {bound(D, T):9.1f}")
    print(f"{algo:>14} slope {regret_slope(horizons, means):.3f}")
