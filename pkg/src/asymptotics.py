"""
Asymptotics Module
Trend fitting for pole trajectories and the exact two-body reduction
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import statsmodels.api as sm
from numpy.typing import ArrayLike, NDArray
from sklearn.linear_model import LinearRegression

from src.algebra import bilinear_dot
from src.errors import InvalidInput

logger = logging.getLogger(__name__)

# Below this |2E| the relative motion has no linear asymptote
DEGENERATE_ENERGY = 1e-14


@dataclass
class TwoBodyAsymptotics:
    """
    Large-time law x_j(t) = v_j t − α_j + o(1) of a two-pole state

    ``collision_time`` is the first positive time at which the exact relative
    coordinate vanishes, if any.
    """

    velocities: Tuple[complex, complex]
    offsets: Optional[Tuple[complex, complex]]
    coupling: complex
    relative_energy: complex
    collision_time: Optional[float]

    @property
    def degenerate(self) -> bool:
        return self.offsets is None

    def to_dict(self) -> Dict:
        pair = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {
            'velocities': [pair(v) for v in self.velocities],
            'offsets': None if self.offsets is None else [pair(a) for a in self.offsets],
            'coupling': pair(self.coupling),
            'relative_energy': pair(self.relative_energy),
            'collision_time': self.collision_time,
        }


def _two_body_data(state):
    if state.n != 2:
        raise InvalidInput(f"two-body reduction needs exactly 2 poles, got {state.n}")
    x1, x2 = state.poles
    v1, v2 = state.velocities
    g = bilinear_dot(state.spins[0], state.spins[1])
    r0 = x1 - x2
    rdot0 = v1 - v2
    two_e = rdot0 ** 2 + 8.0 * g / r0 ** 2
    return x1 + x2, v1 + v2, r0, rdot0, g, two_e


def _relative_coordinate(r0, rdot0, two_e, times: NDArray) -> NDArray:
    """
    Continuous square root of r(t)² = r0² + 2 r0 ṙ0 t + 2E t²

    Writing the quadratic as 2E (t − t_a)(t − t_b), each principal root
    sqrt(t − t_a) is continuous on the real line while Im t_a ≠ 0, so the
    product only needs its sign fixed once at t = 0.
    """
    times = np.asarray(times, dtype=float)
    if abs(two_e) < DEGENERATE_ENERGY:
        branch = np.sqrt((1.0 + 2.0 * rdot0 * times / r0).astype(complex))
        return r0 * branch
    t_a, t_b = np.roots([two_e, 2.0 * r0 * rdot0, r0 ** 2])
    scale = np.sqrt(complex(two_e))
    branch = scale * np.sqrt(times.astype(complex) - t_a) * np.sqrt(times.astype(complex) - t_b)
    at_zero = scale * np.sqrt(-t_a + 0j) * np.sqrt(-t_b + 0j)
    sign = 1.0 if abs(at_zero - r0) <= abs(at_zero + r0) else -1.0
    return sign * branch


def two_body_positions(state, times: ArrayLike) -> NDArray:
    """
    Exact pole positions of a two-pole state at the given times

    g = s1·s2 is conserved and r = x1 − x2 obeys r̈ = 8g/r³, so r² is a
    quadratic in time while x1 + x2 moves uniformly.

    Returns:
        complex array of shape (len(times), 2)
    """
    centre0, centre_v, r0, rdot0, _, two_e = _two_body_data(state)
    elapsed = np.asarray(times, dtype=float) - state.t
    centre = centre0 + centre_v * elapsed
    rel = _relative_coordinate(r0, rdot0, two_e, elapsed)
    return np.column_stack([(centre + rel) / 2.0, (centre - rel) / 2.0])


def two_body_asymptotics(state) -> TwoBodyAsymptotics:
    """Asymptotic velocities and offsets of a two-pole state"""
    centre0, centre_v, r0, rdot0, g, two_e = _two_body_data(state)

    collision_time = None
    if abs(two_e) >= DEGENERATE_ENERGY:
        roots = np.roots([two_e, 2.0 * r0 * rdot0, r0 ** 2])
    elif abs(rdot0) > 0:
        roots = np.array([-r0 / (2.0 * rdot0)])
    else:
        roots = np.array([])
    for root in roots:
        if abs(root.imag) <= 1e-12 * max(1.0, abs(root)) and root.real > 0:
            hit = state.t + float(root.real)
            collision_time = hit if collision_time is None else min(collision_time, hit)

    if abs(two_e) < DEGENERATE_ENERGY:
        logger.info("two-body state has no linear relative asymptote (2E≈0)")
        half = centre_v / 2.0
        return TwoBodyAsymptotics((half, half), None, g, two_e, collision_time)

    # Pick the asymptotic branch the continuous relative coordinate follows
    probe = 1e6 * (1.0 + abs(r0) / np.sqrt(abs(two_e)))
    rho = _relative_coordinate(r0, rdot0, two_e, np.array([probe]))[0] / probe
    rho = np.sqrt(complex(two_e)) * (1.0 if abs(rho - np.sqrt(complex(two_e))) < abs(rho) else -1.0)

    # α_j measured from the state's own clock
    shift = r0 * rdot0 / rho
    v1 = (centre_v + rho) / 2.0
    v2 = (centre_v - rho) / 2.0
    alpha1 = -(centre0 + shift) / 2.0 + v1 * state.t
    alpha2 = -(centre0 - shift) / 2.0 + v2 * state.t
    return TwoBodyAsymptotics((complex(v1), complex(v2)), (complex(alpha1), complex(alpha2)),
                              complex(g), complex(two_e), collision_time)


class TrajectoryFitter:
    """Regression fits of pole motion and monitored series"""

    def __init__(self):
        self.models = {}

    def fit_linear_motion(self,
                          times: ArrayLike,
                          positions: ArrayLike,
                          with_decay: bool = True,
                          key: Optional[str] = None) -> Dict:
        """
        Fit x(t) = v t − α + β/t to a complex pole track

        Real and imaginary parts are fitted separately with
        LinearRegression on the features [t, 1/t].

        Returns:
            dict with velocity, offset (α), decay (β) and rmse
        """
        times = np.asarray(times, dtype=float)
        positions = np.asarray(positions, dtype=complex)
        if len(times) < 3 or len(times) != len(positions):
            raise InvalidInput("motion fit needs at least 3 matching samples")
        if with_decay and np.any(times <= 0):
            raise InvalidInput("decay feature 1/t needs positive times")

        features = np.column_stack([times, 1.0 / times]) if with_decay else times[:, None]
        parts = {}
        for label, values in (('re', positions.real), ('im', positions.imag)):
            model = LinearRegression().fit(features, values)
            parts[label] = model
            if key is not None:
                self.models[f"{key}_{label}"] = model

        predicted = parts['re'].predict(features) + 1j * parts['im'].predict(features)
        residual = positions - predicted
        decay = complex(parts['re'].coef_[1], parts['im'].coef_[1]) if with_decay else 0j
        return {
            'velocity': complex(parts['re'].coef_[0], parts['im'].coef_[0]),
            'offset': -complex(parts['re'].intercept_, parts['im'].intercept_),
            'decay': decay,
            'rmse': float(np.sqrt(np.mean(np.abs(residual) ** 2))),
        }

    def trend_slope(self, times: ArrayLike, values: ArrayLike, log: bool = True) -> Dict:
        """
        OLS slope of a monitored series against time

        With ``log`` the slope is of log(values), i.e. an exponential growth
        rate per unit time.
        """
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if len(times) < 3:
            raise InvalidInput("trend fit needs at least 3 samples")
        if log:
            if np.any(values <= 0):
                raise InvalidInput("log-trend needs positive values")
            values = np.log(values)
        design = sm.add_constant(times, has_constant='add')
        fit = sm.OLS(values, design).fit()
        slope_se = float(fit.bse[1]) if np.isfinite(fit.bse[1]) else 0.0
        return {
            'slope': float(fit.params[1]),
            'intercept': float(fit.params[0]),
            'stderr': slope_se,
            'r_squared': float(fit.rsquared) if np.isfinite(fit.rsquared) else 1.0,
        }

    @staticmethod
    def fit_quality(actual: ArrayLike, predicted: ArrayLike) -> Dict:
        """Error metrics between a track and its model"""
        actual = np.asarray(actual)
        predicted = np.asarray(predicted)
        error = np.abs(actual - predicted)
        return {
            'mae': float(np.mean(error)),
            'rmse': float(np.sqrt(np.mean(error ** 2))),
            'max_error': float(np.max(error)),
        }
