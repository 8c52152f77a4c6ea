"""
Configuration module for the Einstein-wave map simulator
"""
import os
import logging

# Physics
DEFAULT_KAPPA = 1.0

# Target geometry
DEFAULT_SERIES_SWITCH = 1e-3  # below this |s| the remainder (f(s)-s)/s^3 uses its Taylor series
SERIES_TERMS = 5

# Initial data
SUPPORT_TOLERANCE = 1e-12     # relative tail allowed beyond 0.8 r_max
SUBCRITICAL_MARGIN = 0.05     # admissible iff kappa*E0/2pi < 1 - margin
PHI_CONSISTENCY_TOLERANCE = 1e-6  # relative gap allowed between Phi0 and d_r phi0
PHI_CONSISTENCY_STEP = 1e-5       # central-difference step of that check

# Metric solve
BETA_GUARD = 25.0             # beta above this means kappa*E/2pi is within ~1e-11 of 1

# Polar evolution
DEFAULT_CFL = 0.5
DEFAULT_DISSIPATION_EPS = 0.02
DEFAULT_BOUNDARY = "outgoing"
DEFAULT_OUTPUT_EVERY = 1
DEFAULT_MONITOR_THRESHOLD = 1e6
DT_FLOOR = 1e-14

# Null evolution
MARGINAL_TOLERANCE = 0.5e-8   # |lambda| below this is classified as marginally trapped
DIAMOND_CORRECTIONS = 1

# Diagnostics
DEFAULT_LAMBDA_PRIME = 0.5

# Quadrature
KERNEL_EPSABS = 1e-12
KERNEL_EPSREL = 1e-12
KERNEL_LIMIT = 200
REPRESENTATION_EPSABS = 1e-9
REPRESENTATION_EPSREL = 1e-8
REPRESENTATION_LIMIT = 200

# Output
CSV_FORMAT = "%.17g"
DEFAULT_OUTPUT_DIR = "out"
DIAG_FILENAME = "diag.csv"

# Worker cap for convergence levels
THREADS_ENV_VAR = "EWM_THREADS"


def worker_count(requested):
    """Number of workers to use, capped by EWM_THREADS when it is set"""
    cap = os.environ.get(THREADS_ENV_VAR)
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            logging.getLogger(__name__).warning(f"Ignoring non-integer {THREADS_ENV_VAR}={cap!r}")
    return max(1, min(requested, limit))


def init_logging(level=logging.INFO):
    """Initialize logging configuration"""
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
