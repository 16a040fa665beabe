"""Numerical tolerances and instance-size caps shared across the package."""

TOL_FEAS = 1e-8
TOL_GAP = 1e-7
TOL_TIE = 1e-9

# Default caps for explicit (tensor) instances: direct schemes have
# d * |A|**(m*n) coordinates.
MAX_RECEIVERS = 3
MAX_TYPES = 3
MAX_ACTIONS = 3
MAX_STATES = 4

# Binary-action set-function instances.
MAX_SET_FUNCTION_RECEIVERS = 8
MAX_BRUTE_FORCE_RECEIVERS = 20
MAX_SUPERMODULAR_CHECK = 12
