"""
Field Module
Closed-form evaluation of m, its half-wave term H∂ₓm and ∂ₜm for a rational
soliton state, the field-equation residual, and a principal-value quadrature
oracle for the Hilbert transform

Hilbert transform convention: H f(x) = (1/π) PV∫ f(y)/(y − x) dy. Residues give
H[1/(· − a)] = −i/(x − a) for Im a > 0, so H∂ₓm = −2 Re Σ s_j/(x − x_j)².
"""

import logging
from dataclasses import dataclass
from typing import Dict, List

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import simpson

from src.configuration import SolitonState
from src.errors import ConfigError
from src.forces import spin_pole_forces

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Grid for the principal-value oracle and tolerances for adaptive quadrature

    Attributes:
        half_width: truncation L of the integral, tail beyond it is corrected
        window: half-width of the excluded symmetric window around y = x
        nodes: number of geometric nodes between window and half_width
        epsrel: relative tolerance for scipy adaptive quadrature
        limit: subinterval limit for scipy adaptive quadrature
    """

    half_width: float = 1e3
    window: float = 1e-3
    nodes: int = 100_000
    epsrel: float = 1e-10
    limit: int = 500

    def __post_init__(self):
        if not 0 < self.window < self.half_width:
            raise ConfigError("quadrature needs 0 < window < half_width")
        if self.nodes < 3:
            raise ConfigError("quadrature needs at least 3 nodes")


@dataclass
class FieldSample:
    """Field quantities at one point"""

    x: float
    m: NDArray
    halfwave: NDArray
    mt: NDArray
    residual: NDArray

    def to_dict(self) -> Dict:
        return {
            'x': self.x,
            'm': self.m.tolist(),
            'halfwave': self.halfwave.tolist(),
            'mt': self.mt.tolist(),
            'residual': self.residual.tolist(),
        }


def _points(x: ArrayLike) -> NDArray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _shape_like(x: ArrayLike, values: NDArray) -> NDArray:
    return values[0] if np.ndim(x) == 0 else values


def _pole_sums(state: SolitonState, points: NDArray, power: int, weights: NDArray = None) -> NDArray:
    """Σ_j w_j/(x − x_j)^power at every point, shape (M, 3)"""
    weights = state.spins if weights is None else weights
    return ((points[:, None] - state.poles[None, :]) ** (-power)) @ weights


def eval_m(state: SolitonState, x: ArrayLike) -> NDArray:
    """m(x) = m0 − 2 Σ Im[s_j/(x − x_j)]"""
    points = _points(x)
    if state.n == 0:
        return _shape_like(x, np.tile(state.m0, (len(points), 1)))
    values = state.m0[None, :] - 2.0 * np.imag(_pole_sums(state, points, 1))
    return _shape_like(x, values)


def eval_m_complex(state: SolitonState, x: ArrayLike) -> NDArray:
    """
    The ansatz with both pole families summed separately

    m0 + i Σ s_j/(x − x_j) − i Σ s̄_j/(x − x̄_j); its imaginary part cancels
    by conjugate pairing and is kept to check that cancellation.
    """
    points = _points(x)
    values = np.tile(state.m0.astype(complex), (len(points), 1))
    if state.n:
        upper = _pole_sums(state, points, 1)
        lower = ((points[:, None] - np.conj(state.poles)[None, :]) ** -1) @ np.conj(state.spins)
        values = values + 1j * upper - 1j * lower
    return _shape_like(x, values)


def eval_dm(state: SolitonState, x: ArrayLike) -> NDArray:
    """∂ₓm = 2 Σ Im[s_j/(x − x_j)²]"""
    points = _points(x)
    if state.n == 0:
        return _shape_like(x, np.zeros((len(points), 3)))
    return _shape_like(x, 2.0 * np.imag(_pole_sums(state, points, 2)))


def eval_halfwave(state: SolitonState, x: ArrayLike) -> NDArray:
    """H∂ₓm = −2 Re Σ s_j/(x − x_j)², decaying like 1/x²"""
    points = _points(x)
    if state.n == 0:
        return _shape_like(x, np.zeros((len(points), 3)))
    return _shape_like(x, -2.0 * np.real(_pole_sums(state, points, 2)))


def eval_mt(state: SolitonState, x: ArrayLike) -> NDArray:
    """∂ₜm = −2 Σ Im[ṡ_j/(x − x_j) + s_j ẋ_j/(x − x_j)²] with ṡ_j from the force law"""
    points = _points(x)
    if state.n == 0:
        return _shape_like(x, np.zeros((len(points), 3)))
    spin_dot, _ = spin_pole_forces(state.poles, state.spins)
    moving = state.spins * state.velocities[:, None]
    values = -2.0 * np.imag(_pole_sums(state, points, 1, spin_dot) + _pole_sums(state, points, 2, moving))
    return _shape_like(x, values)


def residual_vectors(state: SolitonState, xs: ArrayLike) -> NDArray:
    """m_t − m × H∂ₓm at every point, shape (M, 3)"""
    points = _points(xs)
    if state.n == 0:
        return np.zeros((len(points), 3))
    m = eval_m(state, points)
    return eval_mt(state, points) - np.cross(m, eval_halfwave(state, points))


def pde_residual(state: SolitonState, xs: ArrayLike) -> float:
    """max over xs of |m_t − m × H∂ₓm|"""
    if state.n == 0 or np.size(xs) == 0:
        return 0.0
    return float(np.max(np.linalg.norm(residual_vectors(state, xs), axis=1)))


def chebyshev_points(lower: float, upper: float, count: int) -> NDArray:
    """Chebyshev extreme points mapped to [lower, upper], ascending"""
    unit = np.polynomial.chebyshev.chebpts2(count)
    return lower + (upper - lower) * (unit + 1.0) / 2.0


def sample_field(state: SolitonState, xs: ArrayLike) -> List[FieldSample]:
    points = _points(xs)
    m = eval_m(state, points)
    halfwave = eval_halfwave(state, points)
    mt = eval_mt(state, points)
    residual = mt - np.cross(m, halfwave)
    return [FieldSample(float(points[i]), m[i], halfwave[i], mt[i], residual[i])
            for i in range(len(points))]


def field_scan(state: SolitonState, xmin: float, xmax: float, count: int) -> pd.DataFrame:
    """
    Tabulate m and the residual norm on a uniform grid

    Returns:
        DataFrame with columns x, m1, m2, m3, residual_norm
    """
    points = np.linspace(xmin, xmax, count)
    m = eval_m(state, points)
    residual = residual_vectors(state, points)
    return pd.DataFrame({
        'x': points,
        'm1': m[:, 0],
        'm2': m[:, 1],
        'm3': m[:, 2],
        'residual_norm': np.linalg.norm(residual, axis=1),
    })


def pv_oracle(state: SolitonState, x: float, grid: QuadratureSpec = QuadratureSpec()) -> NDArray:
    """
    Numerical H∂ₓm at x from the principal-value integral

    With g = ∂ₓm, PV∫ g(y)/(y − x) dy = ∫_0^∞ [g(x+u) − g(x−u)]/u du. The
    body [window, L] is integrated by Simpson's rule in s = ln u, where the
    integrand becomes g(x+eˢ) − g(x−eˢ). The excluded window contributes
    about window·F(window/2); beyond L the 1/y² decay of g gives F ≈ c/u⁴.
    """
    if state.n == 0:
        return np.zeros(3)
    x = float(x)
    delta, length = grid.window, grid.half_width

    logs = np.linspace(np.log(delta), np.log(length), grid.nodes)
    offsets = np.exp(logs)
    body = simpson(eval_dm(state, x + offsets) - eval_dm(state, x - offsets), x=logs, axis=0)

    half = np.array([delta / 2.0])
    window = 2.0 * (eval_dm(state, x + half)[0] - eval_dm(state, x - half)[0])

    # g(y) ≈ c2/y² + c3/y³ at large |y|
    c2 = 2.0 * np.imag(state.spins.sum(axis=0))
    c3 = 4.0 * np.imag((state.poles[:, None] * state.spins).sum(axis=0))
    tail = (2.0 * c3 - 4.0 * c2 * x) / (3.0 * length ** 3)

    return (body + window + tail) / np.pi
