"""Persuasion with receivers that report their types."""
from .ftrl import (FtrlResult, LiftedFtrl, MenuProjector, all_type_profiles,
                   best_menu_in_hindsight, ftrl_objective, ftrl_update,
                   ftrl_update_dual_ellipsoid, ftrl_update_supergradient, profile_counts)
from .learners import (DUAL_ELLIPSOID, Algorithm2Run, Algorithm2State, SingleReceiverRun,
                       algorithm2_bound, algorithm2_round, init_algorithm2, run_algorithm2,
                       single_type_reporting_learner, single_type_reporting_problem)
from .menus import (MenuLayout, build_extended_polytope, ic_gain, min_norm_menu, obedience_gain,
                    product_scheme, report_values, single_receiver_loss_matrix, truthful_reports)
from .set_functions import SetFunction, brute_force_oracle, opt_oracle
from .value import (consistency_residual, g_supergradient, g_value_dual_ellipsoid,
                    g_value_primal, joint_value)

build_extended_polytope_L = build_extended_polytope
