"""
Persuading a judge
==================

A prosecutor commits to a signaling scheme about a defendant who is innocent
with probability 0.7.  The judge convicts only when the posterior probability
of guilt is at least one half; the prosecutor wants conviction.
"""
import numpy as np

from online_persuasion import PersuasionInstance
from online_persuasion.geometry import solve_lp
from online_persuasion.persuasion import (build_persuasive_polytope, protocol_utility,
                                          sender_utility_vector, uninformative_scheme)

# states (innocent, guilty), actions (acquit, convict)
U = np.array([[[[1.0, 0.0], [0.0, 1.0]]]])
S = np.array([[0.0, 0.0], [1.0, 1.0]])
judge = PersuasionInstance(np.array([0.7, 0.3]), U, S)

# %% revealing nothing: the judge acquits
print("no information:", protocol_utility(judge, uninformative_scheme(judge), (0,)))

# %% the optimal persuasive scheme
P = build_persuasive_polytope(judge)
sol = solve_lp(sender_utility_vector(judge, (0,)), P, "Max")
phi = sol.point.reshape(2, 2)
print("conviction probability:", round(sol.value, 6))
print("P(convict signal | innocent) =", phi[0, 1], "(3/7 =", 3 / 7, ")")
