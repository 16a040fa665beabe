"""
Learning a menu when receivers report their types
=================================================

Two receivers with two types each and an anonymous sender utility.  Each
round the sender commits to a menu of marginal schemes, receivers report
their types, and the sender picks a joint scheme consistent with the menu.
"""
import numpy as np

from online_persuasion.harness import adversary_sequence, generate_instance
from online_persuasion.type_reporting import (algorithm2_bound, all_type_profiles, ic_gain,
                                              run_algorithm2)

inst = generate_instance(dict(n=2, states=2, types=2, actions=2, sender="anonymous"), 404)
profiles = all_type_profiles(inst)
T = 512
seq = [profiles[j] for j in adversary_sequence("two_phase", len(profiles), T, 1)]

run = run_algorithm2(inst, seq, keep=True)
print("regret", round(run.regret, 3), "bound", round(algorithm2_bound(inst, T), 1))
print("worst misreport gain over committed menus", float(np.max(ic_gain(inst, run.menus.reshape(T, -1)))))
print("mean seconds per round", run.round_times.mean())

# %% the same rounds through the dual route (slower, oracle calls only)
short = run_algorithm2(inst, seq[:5], horizon=T, feature="dual-ellipsoid")
print("dual route, first rounds:", np.round(short.values, 6))
print("primal route, first rounds:", np.round(run.values[:5], 6))
