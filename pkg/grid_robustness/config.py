"""Configuration settings for grid-robustness."""

import os

# Package paths
PACKAGE_ROOT = os.path.dirname(os.path.abspath(__file__))
CASES_ROOT = os.path.join(PACKAGE_ROOT, "cases")

# Network model settings
BALANCE_TOL = 1e-9  # pu, |sum of injections| accepted without slack adjustment
NEWTON_TOL = 1e-12  # pu, max-norm of the power-balance mismatch
NEWTON_MAX_ITER = 50
EQUILIBRIUM_RESIDUAL_TOL = 1e-10  # pu

# Lur'e form settings
EIG_TOL = 1e-8  # real-part margin separating the shift mode from instability

# Gain settings
GAIN_REL_TOL = 1e-4
GAIN_MAX_STEP = 1e-2  # s
GAIN_STEP_FACTOR = 0.2  # h = min(GAIN_STEP_FACTOR / |lambda|_max, GAIN_MAX_STEP)
GAIN_CHUNK_STEPS = 512  # must be even
GAIN_MAX_STEPS = 2_000_000
GAIN_BATCH_COLUMNS = 16  # impulse-response columns per task
GAIN_MAX_REFINE = 8  # step halvings allowed to meet GAIN_REL_TOL
GAIN_ENTRY_FLOOR = 1e-3  # fraction of the largest gain used as the error floor of small entries

# Certificate settings
EPS_STRICT = 1e-9
POWER_ITER_TOL = 1e-12
POWER_ITER_MAX = 10_000
INVERSE_SIGN_TOL = 1e-10  # relative, entries above -tol * max|entry| count as nonnegative

# Optimizer settings
OPT_SEEDS = 8
OPT_BARRIER_GAP = 1e-10  # stop when (number of barrier terms) / t falls below this
OPT_BARRIER_MU = 10.0  # barrier parameter growth factor
OPT_NEWTON_TOL = 1e-12
OPT_NEWTON_MAX_ITER = 100

# Simulator settings
SIM_RTOL = 1e-8
SIM_ATOL = 1e-10
SIM_SAMPLE_DT = 0.01  # s, output sampling interval
SLIP_ANGLE = 3.141592653589793  # rad, |phi* + z| at which a line has slipped a pole
EMPIRICAL_MU_START = 0.1  # pu
EMPIRICAL_MU_CAP = 100.0  # pu
EMPIRICAL_HORIZON = 30.0  # s

# Task settings
MAX_CONCURRENT_TASKS = 4

# Acceptance constants
TIGHTNESS_GAP = 0.35  # empirical / certified - 1 at the SMIB curve peak

# Log record tag
extension_tag = "grid-robustness"

# Tolerances that may be overridden from the command line with --tol NAME=VAL
TOLERANCE_KEYS = {
    "balance": "BALANCE_TOL",
    "newton": "NEWTON_TOL",
    "residual": "EQUILIBRIUM_RESIDUAL_TOL",
    "eig": "EIG_TOL",
    "gain": "GAIN_REL_TOL",
    "gain_step": "GAIN_MAX_STEP",
    "strict": "EPS_STRICT",
    "power_iter": "POWER_ITER_TOL",
    "barrier_gap": "OPT_BARRIER_GAP",
    "rtol": "SIM_RTOL",
    "atol": "SIM_ATOL",
    "sample_dt": "SIM_SAMPLE_DT",
    "horizon": "EMPIRICAL_HORIZON",
}


def override_tolerance(name: str, value: float):
    """Rebind one of the tolerances listed in TOLERANCE_KEYS."""
    if name not in TOLERANCE_KEYS:
        raise KeyError(f"Unknown tolerance '{name}', expected one of: {', '.join(sorted(TOLERANCE_KEYS))}")
    if not value > 0:
        raise ValueError(f"Tolerance '{name}' must be positive, got {value}")
    globals()[TOLERANCE_KEYS[name]] = float(value)
