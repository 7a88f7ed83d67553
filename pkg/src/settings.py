"""
Settings Module
Package-wide numerical defaults and environment overrides
"""

import os
import logging

from src.errors import ConfigError

logger = logging.getLogger(__name__)

# Admissibility tolerance for nullity, orthogonality and |m0| = 1
EPS_CONSTRAINT = 1e-10

# Integrator defaults
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_NU_BLOWUP = 1e-6
DEFAULT_ETA_COLLISION = 1e-8
DEFAULT_ETA_RE = 1e-3
DEFAULT_H_MIN = 1e-14
DEFAULT_SAMPLE_DT = 0.1

# Dense Cauchy fallback below this node gap
CAUCHY_DENSE_GAP = 1e-8

# Accepted range for any tolerance override
TOLERANCE_RANGE = (1e-14, 1e-2)

# Probe horizons
TWO_SOLITON_HORIZON = 50.0
MANY_SOLITON_HORIZON = 20.0

THREADS_ENV = 'HWM_THREADS'


def check_tolerance(name: str, value: float) -> float:
    """Raise ConfigError unless value lies inside TOLERANCE_RANGE"""
    low, high = TOLERANCE_RANGE
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name)
    if not low <= value <= high:
        raise ConfigError(f"{name}={value:g} outside [{low:g}, {high:g}]", field=name, value=value)
    return value


def check_positive(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name)
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value:g}", field=name, value=value)
    return value


def sweep_workers(default: int = -1) -> int:
    """
    Number of joblib workers for sweeps

    HWM_THREADS caps the pool; unset means every core (joblib's -1).
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == '':
        return default
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if workers < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {workers}")
    logger.debug("sweep parallelism capped at %d workers", workers)
    return workers
