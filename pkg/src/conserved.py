"""
Conserved Module
Conserved and monitored quantities of a soliton state, with two independent
quadratures of the H^{1/2} energy

Energy normalisation: energy_quadrature = −∫ H∂ₓm·(m − m0) dx, the
⟨|∇|m, m⟩ form, and energy_algebraic = −4π Σ_{j,k} s_j·s̄_k/(x_j − x̄_k)².
The two agree; the single canonical soliton s = (1, i, 0), x = i has energy 2π.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad, quad_vec

from src.algebra import bilinear_dot, hermitian_dot
from src.configuration import SolitonState, constraint_vectors
from src.detectors import blow_up_witness, collision_witness
from src.errors import CoincidentPoles, InvalidInput
from src.field import QuadratureSpec, eval_dm, eval_halfwave, eval_m

logger = logging.getLogger(__name__)

ENERGY_PREFACTOR = -4.0 * np.pi


@dataclass
class ConservedSnapshot:
    """Monitored quantities of one state"""

    spin_sum: NDArray
    velocity_sum: complex
    im_sum: float
    energy_algebraic: float
    min_im: float
    min_sep: float
    max_spin_norm: float
    max_null_residual: float = 0.0
    max_orthogonality_residual: float = 0.0
    spin_height_ratio: float = 0.0

    def to_json_dict(self) -> Dict:
        finite = lambda v: None if not np.isfinite(v) else float(v)
        return {
            'spin_sum': [[float(c.real), float(c.imag)] for c in self.spin_sum],
            'velocity_sum': [float(self.velocity_sum.real), float(self.velocity_sum.imag)],
            'im_sum': float(self.im_sum),
            'energy_algebraic': float(self.energy_algebraic),
            'min_im': finite(self.min_im),
            'min_sep': finite(self.min_sep),
            'max_spin_norm': float(self.max_spin_norm),
            'max_null_residual': float(self.max_null_residual),
            'max_orthogonality_residual': float(self.max_orthogonality_residual),
            'spin_height_ratio': float(self.spin_height_ratio),
        }

    @classmethod
    def from_json_dict(cls, doc: Dict) -> 'ConservedSnapshot':
        restore = lambda v: float('inf') if v is None else float(v)
        return cls(
            spin_sum=np.array([complex(re, im) for re, im in doc['spin_sum']]),
            velocity_sum=complex(*doc['velocity_sum']),
            im_sum=float(doc['im_sum']),
            energy_algebraic=float(doc['energy_algebraic']),
            min_im=restore(doc['min_im']),
            min_sep=restore(doc['min_sep']),
            max_spin_norm=float(doc['max_spin_norm']),
            max_null_residual=float(doc.get('max_null_residual', 0.0)),
            max_orthogonality_residual=float(doc.get('max_orthogonality_residual', 0.0)),
            spin_height_ratio=float(doc.get('spin_height_ratio', 0.0)),
        )


def energy_matrix(state: SolitonState) -> NDArray:
    """
    E_jk = −4π s_j·s̄_k/(x_j − x̄_k)²

    The matrix is Hermitian, so every principal block sums to a real number.
    """
    gram = state.spins @ np.conj(state.spins).T
    denom = (state.poles[:, None] - np.conj(state.poles)[None, :]) ** 2
    return ENERGY_PREFACTOR * gram / denom


def snapshot(state: SolitonState) -> ConservedSnapshot:
    """Evaluate every monitored quantity of a state"""
    if state.n == 0:
        return ConservedSnapshot(np.zeros(3, dtype=complex), 0j, 0.0, 0.0,
                                 float('inf'), float('inf'), 0.0)

    min_im = blow_up_witness(state.poles)[0]
    min_sep, j, k = collision_witness(state.poles)
    if min_sep == 0.0:
        raise CoincidentPoles(j, k)

    norms = np.sqrt(np.real(hermitian_dot(state.spins, state.spins)))
    w = constraint_vectors(state)
    return ConservedSnapshot(
        spin_sum=state.spins.sum(axis=0),
        velocity_sum=complex(state.velocities.sum()),
        im_sum=float(state.poles.imag.sum()),
        energy_algebraic=float(np.real(energy_matrix(state).sum())),
        min_im=min_im,
        min_sep=min_sep,
        max_spin_norm=float(norms.max()),
        max_null_residual=float(np.abs(bilinear_dot(state.spins, state.spins)).max()),
        max_orthogonality_residual=float(np.abs(bilinear_dot(state.spins, w)).max()),
        spin_height_ratio=float(np.max(norms / (2.0 * state.poles.imag))),
    )


@dataclass
class EnergySplit:
    """
    Block sums of the energy matrix for a subset S of poles

    a: S×S, b: Sᶜ×S, c: S×Sᶜ, d: Sᶜ×Sᶜ. d is the energy of the field built
    from the complement poles alone, hence non-negative.
    """

    a: float
    b: float
    c: float
    d: float
    d_certified: bool

    @property
    def total(self) -> float:
        return self.a + self.b + self.c + self.d

    def as_tuple(self):
        return self.a, self.b, self.c, self.d


def energy_split(state: SolitonState, subset: Iterable[int], tol: float = 1e-10) -> EnergySplit:
    """
    Split the algebraic energy by membership of (j, k) in the subset

    Args:
        subset: 0-based pole indices
        tol: slack of the d ≥ −tol certificate
    """
    members = sorted(set(int(i) for i in subset))
    if any(i < 0 or i >= state.n for i in members):
        raise InvalidInput(f"subset {members} not inside 0..{state.n - 1}")
    inside = np.zeros(state.n, dtype=bool)
    inside[members] = True
    outside = ~inside

    matrix = energy_matrix(state) if state.n else np.zeros((0, 0))
    block = lambda rows, cols: float(np.real(matrix[np.ix_(rows, cols)].sum()))
    d = block(outside, outside)
    return EnergySplit(block(inside, inside), block(outside, inside),
                       block(inside, outside), d, d >= -tol)


def _real_line_segments(state: SolitonState):
    """Break points that keep adaptive quadrature on the peaks of the field"""
    centres = state.poles.real
    reach = 20.0 * max(1.0, float(np.max(state.poles.imag)))
    left = float(centres.min() - reach)
    right = float(centres.max() + reach)
    points = sorted(set(np.round(centres, 12)))
    return left, right, [p for p in points if left < p < right]


def _integrate_line(func, state: SolitonState, spec: QuadratureSpec) -> float:
    left, right, points = _real_line_segments(state)
    options = dict(epsabs=1e-13, epsrel=spec.epsrel, limit=spec.limit)
    middle = quad(func, left, right, points=points or None, **options)[0]
    lower = quad(func, -np.inf, left, **options)[0]
    upper = quad(func, right, np.inf, **options)[0]
    return lower + middle + upper


def energy_quadrature(state: SolitonState,
                      spec: Optional[QuadratureSpec] = None,
                      method: str = 'fourier') -> float:
    """
    Numerical H^{1/2} energy

    method='fourier' integrates −H∂ₓm·(m − m0) with adaptive quadrature.
    method='double' uses the kernel form ∫|∫ ∂ₓm(y)/√|x − y| dy|² dx, which
    equals 2π times the Fourier form and is divided by 2π here.
    """
    spec = spec or QuadratureSpec()
    if state.n == 0:
        return 0.0

    if method == 'fourier':
        def density(x):
            return -float(np.dot(eval_halfwave(state, x), eval_m(state, x) - state.m0))
        value = _integrate_line(density, state, spec)
    elif method == 'double':
        value = _double_integral_energy(state, spec) / (2.0 * np.pi)
    else:
        raise InvalidInput(f"unknown energy quadrature method {method!r}")
    logger.debug("energy quadrature (%s) = %.12g", method, value)
    return value


def _double_integral_energy(state: SolitonState, spec: QuadratureSpec) -> float:
    # ∫ m'(y)/√|x − y| dy = 2∫_0^∞ [m'(x + u²) + m'(x − u²)] du removes the singularity
    def kernel_transform(x):
        inner = lambda u: eval_dm(state, x + u * u) + eval_dm(state, x - u * u)
        return 2.0 * quad_vec(inner, 0.0, np.inf, epsrel=1e-9, limit=spec.limit)[0]

    def density(x):
        g = kernel_transform(x)
        return float(np.dot(g, g))

    loose = QuadratureSpec(spec.half_width, spec.window, spec.nodes, max(spec.epsrel, 1e-7), spec.limit)
    return _integrate_line(density, state, loose)
