"""Online Bayesian persuasion: a finite-loss learning reduction, persuasion
polytopes, type-reporting menus and an experiment harness."""
from .errors import (ConfigError, ConvergenceFailure, EllipsoidIterationLimit,
                     InstanceValidationError, NotAMember, NotInImage, NumericalFailure,
                     ParamError, PersuasionError, ZeroProbabilitySignal)
from .persuasion import PersuasionInstance
from .regret import BANDIT, OGD, FiniteLossProblem, simulate

__version__ = "0.1.0"
