"""Experiment runner: instances, adversaries, environments, run artifacts
and the command line."""
from .adversaries import KINDS, adversary_sequence, battery_kind
from .config import ENVIRONMENTS, FTRL, ExperimentConfig, validate
from .environments import (Trace, load_instance, run_environment, security_game_environment,
                           type_sequence)
from .instances import (SecurityGame, commitment_value, generate_instance, random_security_game,
                        simplex_grid)
from .records import (CSV_HEADER, SCHEMA, check_rounds, csv_text, decision_hash, read_rounds,
                      regret_report, run_experiment, summary)
