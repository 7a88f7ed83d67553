"""
Configuration Module
Soliton states, the admissibility conditions on spins and poles, and the
constructors that produce admissible initial data
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.algebra import bilinear_dot, cross, hermitian_dot, null_residual, random_frame, rotate_spins
from src.detectors import collision_witness, separation_witness
from src.errors import CoincidentPoles, InvalidInput, NoConvergence
from src.settings import EPS_CONSTRAINT

logger = logging.getLogger(__name__)


class VelocityMode(str, Enum):
    """How pole velocities are set when building admissible data"""

    GIVEN = "given"
    CLOSURE = "closure"


@dataclass(eq=False)
class SolitonState:
    """
    Rational field m = m0 + Σ i s_j/(x − x_j) − i s̄_j/(x − x̄_j) with its
    pole velocities, at time t

    Attributes:
        m0: background value at x → ±∞, shape (3,)
        poles: x_j, complex shape (N,)
        velocities: ẋ_j, complex shape (N,)
        spins: s_j, complex shape (N, 3)
        t: time
        metadata: free-form annotations (preset flags, solver info)
    """

    m0: NDArray
    poles: NDArray
    velocities: NDArray
    spins: NDArray
    t: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.m0 = np.asarray(self.m0, dtype=float).reshape(-1)
            self.poles = np.asarray(self.poles, dtype=complex).reshape(-1)
            self.velocities = np.asarray(self.velocities, dtype=complex).reshape(-1)
            spins = np.asarray(self.spins, dtype=complex)
            self.t = float(self.t)
        except (TypeError, ValueError) as e:
            raise InvalidInput(f"state entries must be numeric: {e}")
        if spins.size == 0:
            spins = spins.reshape(0, 3)
        if spins.ndim == 1 and spins.size == 3:
            spins = spins.reshape(1, 3)
        if spins.ndim != 2 or spins.shape[1] != 3:
            raise InvalidInput(f"spins must have shape (N, 3), got {spins.shape}")
        self.spins = spins

        if self.m0.shape != (3,):
            raise InvalidInput(f"m0 must be a real 3-vector, got shape {self.m0.shape}")
        n = len(self.poles)
        if len(self.velocities) != n or len(self.spins) != n:
            raise InvalidInput(
                f"poles/velocities/spins disagree on N: {n}, {len(self.velocities)}, {len(self.spins)}")
        for name in ('m0', 'poles', 'velocities', 'spins'):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidInput(f"{name} has non-finite entries")
        if not np.isfinite(self.t):
            raise InvalidInput("t must be finite")

    @property
    def n(self) -> int:
        return len(self.poles)

    def replace(self, **changes) -> 'SolitonState':
        changes.setdefault('metadata', dict(self.metadata))
        return dataclasses.replace(self, **changes)

    def copy(self) -> 'SolitonState':
        return SolitonState(self.m0.copy(), self.poles.copy(), self.velocities.copy(),
                            self.spins.copy(), self.t, dict(self.metadata))

    def to_json_dict(self) -> Dict[str, Any]:
        """JSON document with the exact checkpoint field names"""
        pair = lambda z: [float(z.real), float(z.imag)]
        doc = {
            'm0': [float(c) for c in self.m0],
            'poles': [pair(x) for x in self.poles],
            'velocities': [pair(v) for v in self.velocities],
            'spins': [[pair(c) for c in s] for s in self.spins],
            't': self.t,
        }
        if self.metadata:
            doc['metadata'] = self.metadata
        return doc

    @classmethod
    def from_json_dict(cls, doc: Dict[str, Any]) -> 'SolitonState':
        """Parse a checkpoint document; raises InvalidInput on malformed input"""
        missing = [key for key in ('m0', 'poles', 'velocities', 'spins') if key not in doc]
        if missing:
            raise InvalidInput(f"state document missing fields: {', '.join(missing)}")
        try:
            poles = [complex(re, im) for re, im in doc['poles']]
            velocities = [complex(re, im) for re, im in doc['velocities']]
            spins = [[complex(re, im) for re, im in s] for s in doc['spins']]
            t = float(doc.get('t', 0.0))
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"complex entries must be [re, im] pairs: {exc}")
        bad = [j for j, s in enumerate(spins) if len(s) != 3]
        if bad:
            raise InvalidInput(f"spin {bad[0]} has {len(spins[bad[0]])} components, expected 3")
        spins = np.array(spins, dtype=complex) if spins else np.zeros((0, 3), complex)
        return cls(doc['m0'], np.array(poles, dtype=complex), np.array(velocities, dtype=complex),
                   spins, t, dict(doc.get('metadata', {})))


@dataclass
class ConstraintReport:
    """Residuals of nullity, orthogonality and the unit background"""

    null_residuals: NDArray
    orthogonality_residuals: NDArray
    sphere_residual: float
    min_im: float
    min_separation: float
    closure_residuals: NDArray = field(default_factory=lambda: np.zeros(0))
    tol: float = EPS_CONSTRAINT

    @property
    def max_residual(self) -> float:
        values = [self.sphere_residual]
        values.extend(self.null_residuals)
        values.extend(self.orthogonality_residuals)
        return float(max(values))

    def is_admissible(self, tol: Optional[float] = None) -> bool:
        tol = self.tol if tol is None else tol
        return self.max_residual <= tol and self.min_im > 0

    @property
    def admissible(self) -> bool:
        return self.is_admissible()

    def to_dict(self) -> Dict[str, Any]:
        finite = lambda v: None if not np.isfinite(v) else float(v)
        return {
            'admissible': bool(self.admissible),
            'tol': self.tol,
            'null_residuals': [float(r) for r in self.null_residuals],
            'orthogonality_residuals': [float(r) for r in self.orthogonality_residuals],
            'closure_residuals': [float(r) for r in self.closure_residuals],
            'sphere_residual': float(self.sphere_residual),
            'min_im': finite(self.min_im),
            'min_separation': finite(self.min_separation),
            'max_residual': self.max_residual,
        }


def _check_distinct(poles: NDArray):
    if len(poles) < 2:
        return
    distance, j, k = collision_witness(poles)
    if distance == 0.0:
        raise CoincidentPoles(j, k)


def constraint_vectors(state: SolitonState) -> NDArray:
    """
    w_j = i m0 − Σ_{k≠j} s_k/(x_j − x_k) + Σ_k s̄_k/(x_j − x̄_k)

    The orthogonality condition is s_j·w_j = 0; the velocity closure reads
    ẋ_j s_j = w_j × s_j.
    """
    _check_distinct(state.poles)
    return _constraint_vectors(state.m0, state.poles, state.spins)


def _constraint_vectors(m0: NDArray, poles: NDArray, spins: NDArray) -> NDArray:
    n = len(poles)
    diff = poles[:, None] - poles[None, :]
    np.fill_diagonal(diff, 1.0)
    inv = 1.0 / diff
    np.fill_diagonal(inv, 0.0)
    inv_conj = 1.0 / (poles[:, None] - np.conj(poles)[None, :])
    return (1j * m0[None, :] * np.ones((n, 1))
            - inv @ spins
            + inv_conj @ np.conj(spins))


def closure_velocities(state: SolitonState) -> NDArray:
    """
    ẋ_j = (w_j × s_j)·s̄_j / |s_j|²

    On admissible data w_j × s_j is parallel to s_j, so this is the unique
    velocity that cancels the double-pole residue of the field equation.
    Zero spins keep their given velocity.
    """
    w = constraint_vectors(state)
    return _closure_from(w, state.spins, state.velocities)


def _closure_from(w: NDArray, spins: NDArray, fallback: NDArray) -> NDArray:
    norms = np.real(hermitian_dot(spins, spins))
    numer = hermitian_dot(cross(w, spins), spins)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, numer / safe, fallback)


def closure_residuals(state: SolitonState) -> NDArray:
    """|ẋ_j s_j − w_j × s_j| for the velocities carried by the state"""
    w = constraint_vectors(state)
    gap = state.velocities[:, None] * state.spins - cross(w, state.spins)
    return np.sqrt(np.real(hermitian_dot(gap, gap)))


def validate(state: SolitonState, tol: float = EPS_CONSTRAINT) -> ConstraintReport:
    """
    Evaluate the admissibility conditions of a state

    Raises:
        CoincidentPoles: two poles coincide, the residuals are undefined
    """
    _check_distinct(state.poles)
    sphere = abs(float(np.linalg.norm(state.m0)) - 1.0)
    if state.n == 0:
        empty = np.zeros(0)
        return ConstraintReport(empty, empty, sphere, float('inf'), float('inf'), empty, tol)

    w = _constraint_vectors(state.m0, state.poles, state.spins)
    null = np.abs(bilinear_dot(state.spins, state.spins))
    ortho = np.abs(bilinear_dot(state.spins, w))
    gap = state.velocities[:, None] * state.spins - cross(w, state.spins)
    closure = np.sqrt(np.real(hermitian_dot(gap, gap)))
    min_sep = collision_witness(state.poles)[0]
    report = ConstraintReport(np.atleast_1d(null), np.atleast_1d(ortho), sphere,
                              float(np.min(state.poles.imag)), min_sep,
                              np.atleast_1d(closure), tol)
    logger.debug("validate N=%d max residual %.3e", state.n, report.max_residual)
    return report


class ConstraintSolver:
    """
    Damped Gauss-Newton projection onto the admissibility conditions

    Every spin moves in the chart s ← exp(λ) R(ω) s, four real parameters per
    spin that keep s·s = 0 exactly. Poles never move and m0 is renormalised.
    In CLOSURE mode with target velocities the closure velocity of each pole
    is driven to its target as part of the same system.
    """

    FD_STEP = 1e-7
    MAX_PARAM_STEP = 0.5
    MIN_DAMPING = 1.0 / 1024
    # Drops the rotation-about-m0 symmetry, which finite differences leave at noise level
    RCOND = 1e-7

    def __init__(self, tol: float = EPS_CONSTRAINT, max_iter: int = 100):
        if tol <= 0 or max_iter < 1:
            raise InvalidInput("solver needs tol > 0 and max_iter ≥ 1")
        self.tol = tol
        self.max_iter = max_iter

    def _residual(self, m0, poles, spins, targets) -> NDArray:
        w = _constraint_vectors(m0, poles, spins)
        parts = [bilinear_dot(spins, w)]
        if targets is not None:
            parts.append(_closure_from(w, spins, targets) - targets)
        values = np.concatenate([np.atleast_1d(p) for p in parts])
        return values

    @staticmethod
    def _apply(spins: NDArray, params: NDArray) -> NDArray:
        params = params.reshape(-1, 4)
        return rotate_spins(spins, params[:, 1:], params[:, 0])

    def _jacobian(self, m0, poles, spins, targets) -> NDArray:
        n_params = 4 * len(spins)
        columns = []
        for index in range(n_params):
            step = np.zeros(n_params)
            step[index] = self.FD_STEP
            forward = self._residual(m0, poles, self._apply(spins, step), targets)
            backward = self._residual(m0, poles, self._apply(spins, -step), targets)
            columns.append((forward - backward) / (2.0 * self.FD_STEP))
        jac = np.column_stack(columns)
        return np.vstack([jac.real, jac.imag])

    def solve(self,
              template: SolitonState,
              velocities: VelocityMode = VelocityMode.GIVEN,
              targets: Optional[Sequence[float]] = None) -> SolitonState:
        """
        Project a template onto the admissible set

        Args:
            template: state with N ≥ 1, poles in the upper half-plane, null spins
            velocities: GIVEN keeps the template velocities, CLOSURE sets them
                from the closure formula
            targets: closure velocities to impose (CLOSURE mode only)

        Raises:
            NoConvergence: residual above tol after max_iter iterations
        """
        if template.n < 1:
            raise InvalidInput("constraint solver needs at least one pole")
        if np.any(template.poles.imag <= 0):
            raise InvalidInput("poles must lie in the upper half-plane")
        _check_distinct(template.poles)
        scale = np.maximum(1.0, np.real(hermitian_dot(template.spins, template.spins)))
        if np.any(null_residual(template.spins) > 1e-12 * scale):
            raise InvalidInput("template spins must be null (s·s = 0)")
        if targets is not None:
            if velocities != VelocityMode.CLOSURE:
                raise InvalidInput("target velocities only apply in closure mode")
            targets = np.asarray(targets, dtype=complex).reshape(-1)
            if len(targets) != template.n:
                raise InvalidInput("one target velocity per pole")

        m0 = template.m0 / np.linalg.norm(template.m0)
        poles = template.poles
        spins = template.spins.copy()

        residual = self._residual(m0, poles, spins, targets)
        best_spins, best_error = spins, float(np.max(np.abs(residual)))
        iterations = 0
        while best_error > self.tol:
            if iterations >= self.max_iter:
                break
            iterations += 1
            jac = self._jacobian(m0, poles, spins, targets)
            rhs = np.concatenate([residual.real, residual.imag])
            step = -np.linalg.lstsq(jac, rhs, rcond=self.RCOND)[0]
            largest = np.max(np.abs(step))
            if largest > self.MAX_PARAM_STEP:
                step *= self.MAX_PARAM_STEP / largest

            damping = 1.0
            current = np.linalg.norm(residual)
            while damping >= self.MIN_DAMPING:
                trial = self._apply(spins, damping * step)
                trial_residual = self._residual(m0, poles, trial, targets)
                if np.linalg.norm(trial_residual) < (1.0 - 1e-4 * damping) * current:
                    break
                damping /= 2.0
            else:
                logger.debug("line search stalled at iteration %d", iterations)
                break

            spins, residual = trial, trial_residual
            error = float(np.max(np.abs(residual)))
            logger.debug("newton iteration %d residual %.3e (damping %.3g)", iterations, error, damping)
            if error < best_error:
                best_spins, best_error = spins, error

        mode_velocities = template.velocities
        result = SolitonState(m0, poles, mode_velocities, best_spins, template.t, dict(template.metadata))
        if velocities == VelocityMode.CLOSURE:
            result.velocities = closure_velocities(result)
        result.metadata.update({'solver_iterations': iterations, 'velocity_mode': velocities.value})

        if best_error > self.tol:
            report = validate(result, self.tol)
            raise NoConvergence(
                f"constraint residual {best_error:.3e} above tol {self.tol:.1e} after {iterations} iterations",
                best_report=report, best_state=result)
        logger.info("constraints solved for N=%d in %d iterations (residual %.2e)",
                    template.n, iterations, best_error)
        return result


def solve_admissible(template: SolitonState,
                     tol: float = EPS_CONSTRAINT,
                     max_iter: int = 100,
                     velocities: VelocityMode = VelocityMode.GIVEN,
                     targets: Optional[Sequence[float]] = None) -> SolitonState:
    """Functional front end of ConstraintSolver"""
    return ConstraintSolver(tol, max_iter).solve(template, velocities, targets)


def _soliton_spin(m0: NDArray, height: float, theta: float, e1: NDArray) -> NDArray:
    # s = a(u + i w), u = cos θ e1 + sin θ m0, w = m0 × e1, a = height sin θ
    e2 = np.cross(m0, e1)
    amplitude = height * np.sin(theta)
    return amplitude * (np.cos(theta) * e1 + np.sin(theta) * m0 + 1j * e2)


def single_soliton(m0: ArrayLike = (0.0, 0.0, 1.0),
                   height: float = 1.0,
                   velocity: float = 0.0,
                   position: float = 0.0,
                   seed: Optional[int] = None) -> SolitonState:
    """
    Closed-form admissible one-pole state moving at ``velocity``

    A soliton of height y and spin amplitude a travels at cos θ where
    sin θ = a/y, so |velocity| < 1 is required.
    """
    if height <= 0:
        raise InvalidInput("pole on real axis rejected: height must be positive")
    if not -1.0 < velocity < 1.0:
        raise InvalidInput(f"closure velocity must lie in (-1, 1), got {velocity}")
    m0 = np.asarray(m0, dtype=float)
    m0 = m0 / np.linalg.norm(m0)
    e1, _ = random_frame(np.random.default_rng(0 if seed is None else seed), normal=m0)
    spin = _soliton_spin(m0, height, float(np.arccos(velocity)), e1)
    return SolitonState(m0, [complex(position, height)], [complex(velocity)], [spin])


def random_template(n: int,
                    seed: int,
                    m0: Optional[ArrayLike] = None,
                    spacing: float = 4.0,
                    height_range=(0.75, 1.5),
                    speeds: Optional[Sequence[float]] = None) -> SolitonState:
    """
    Well-separated poles carrying independent single-soliton spins

    The result is close to admissible when the spacing is large compared
    with the heights; velocities are the isolated-soliton speeds, random
    in [-0.5, 0.5] unless ``speeds`` fixes them.
    """
    if n < 0:
        raise InvalidInput("N must be non-negative")
    if speeds is not None:
        speeds = np.asarray(speeds, dtype=float).reshape(-1)
        if len(speeds) != n or np.any(np.abs(speeds) >= 1.0):
            raise InvalidInput("need one speed in (-1, 1) per pole")
    rng = np.random.default_rng(seed)
    if m0 is None:
        m0 = rng.normal(size=3)
    m0 = np.asarray(m0, dtype=float)
    m0 = m0 / np.linalg.norm(m0)

    centres = spacing * (np.arange(n) - (n - 1) / 2.0) + rng.uniform(-0.25, 0.25, n)
    heights = rng.uniform(*height_range, n)
    thetas = rng.uniform(np.pi / 3.0, 2.0 * np.pi / 3.0, n)
    if speeds is not None:
        thetas = np.arccos(speeds)
    spins = np.zeros((n, 3), dtype=complex)
    for j in range(n):
        e1, _ = random_frame(rng, normal=m0)
        spins[j] = _soliton_spin(m0, heights[j], thetas[j], e1)
    return SolitonState(m0, centres + 1j * heights, np.cos(thetas).astype(complex), spins)


def random_admissible(n: int,
                      seed: int,
                      tol: float = EPS_CONSTRAINT,
                      attempts: int = 5,
                      speeds: Optional[Sequence[float]] = None,
                      **template_options) -> SolitonState:
    """
    Admissible random state with closure velocities; retries derived seeds

    With ``speeds`` the closure velocities are solved to those values.
    """
    last_error = None
    for attempt in range(attempts):
        template = random_template(n, seed * 7919 + attempt, speeds=speeds, **template_options)
        try:
            state = solve_admissible(template, tol=tol, velocities=VelocityMode.CLOSURE, targets=speeds)
        except NoConvergence as exc:
            last_error = exc
            logger.warning("random template %d/%d for seed %d did not converge", attempt + 1, attempts, seed)
            continue
        state.metadata['seed'] = seed
        return state
    raise last_error


def two_soliton_preset(v1: float,
                       v2: float,
                       heights: Sequence[float],
                       seed: int,
                       velocity_mode: VelocityMode = VelocityMode.GIVEN,
                       separation: float = 6.0,
                       tol: float = EPS_CONSTRAINT,
                       max_iter: int = 100) -> SolitonState:
    """
    Admissible two-pole state with Im x_j = heights and ẋ_j = v_j

    GIVEN mode keeps (v1, v2) as supplied and solves orthogonality only.
    CLOSURE mode also makes (v1, v2) the closure velocities, which needs
    |v_j| < 1. Equal velocities are allowed and flagged as degenerate.
    """
    heights = [float(h) for h in heights]
    if len(heights) != 2:
        raise InvalidInput("two heights are required")
    if min(heights) <= 0:
        raise InvalidInput("pole on real axis rejected: heights must be positive", heights=heights)
    velocity_mode = VelocityMode(velocity_mode)
    rng = np.random.default_rng(seed)
    m0 = rng.normal(size=3)
    m0 /= np.linalg.norm(m0)

    if velocity_mode == VelocityMode.CLOSURE:
        if max(abs(v1), abs(v2)) >= 1.0:
            raise InvalidInput("closure velocities must lie in (-1, 1)", v1=v1, v2=v2)
        thetas = np.arccos([v1, v2])
        targets = [v1, v2]
    else:
        thetas = rng.uniform(np.pi / 4.0, 3.0 * np.pi / 4.0, 2)
        targets = None

    spins = np.zeros((2, 3), dtype=complex)
    for j in range(2):
        e1, _ = random_frame(rng, normal=m0)
        spins[j] = _soliton_spin(m0, heights[j], thetas[j], e1)
    poles = np.array([complex(-separation / 2.0, heights[0]), complex(separation / 2.0, heights[1])])
    template = SolitonState(m0, poles, np.array([v1, v2], dtype=complex), spins)

    state = ConstraintSolver(tol, max_iter).solve(template, velocity_mode, targets)
    state.metadata.update({
        'preset': 'two_soliton',
        'seed': seed,
        'degenerate': bool(v1 == v2),
        'requested_velocities': [float(v1), float(v2)],
    })
    return state


def check_assumptions(state: SolitonState, eta: float) -> Dict[str, bool]:
    """
    Hypotheses of the two-soliton and separation results

    two_solitons: exactly two poles; distinct_velocities: the poles move at
    different speeds; separated: |Re x_j − Re x_k| ≥ eta for all pairs.
    """
    separation = separation_witness(state.poles)[0]
    distinct = state.n < 2 or len(np.unique(np.round(state.velocities, 14))) == state.n
    return {
        'two_solitons': state.n == 2,
        'distinct_velocities': bool(distinct),
        'separated': bool(separation >= eta),
    }
