"""
Cauchy Module
Cauchy matrices A_ij = 1/(z_i − y_j): product-formula determinant, explicit
inverse, spin recovery from field samples and the spin-bound witness
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from src.configuration import SolitonState
from src.detectors import separation_witness
from src.errors import ConjugacyViolation, InvalidInput, NodeCollision, SeparationViolation
from src.settings import CAUCHY_DENSE_GAP

logger = logging.getLogger(__name__)

NODE_STRATEGIES = ('offset', 'shifted')


def _off_diagonal(values: NDArray) -> NDArray:
    diff = values[:, None] - values[None, :]
    np.fill_diagonal(diff, 1.0)
    return diff


@dataclass
class CauchySystem:
    """Node vectors z (rows) and y (columns) of a Cauchy matrix"""

    z: NDArray
    y: NDArray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=complex).reshape(-1)
        self.y = np.asarray(self.y, dtype=complex).reshape(-1)
        if len(self.z) != len(self.y) or len(self.z) == 0:
            raise InvalidInput(f"need M ≥ 1 nodes of each kind, got {len(self.z)} and {len(self.y)}")
        for name, nodes in (('z', self.z), ('y', self.y)):
            gaps = np.abs(_off_diagonal(nodes)) + np.diag(np.full(len(nodes), np.inf))
            if np.any(gaps == 0):
                i, j = np.argwhere(gaps == 0)[0]
                raise NodeCollision(f"duplicate {name} nodes at positions {i} and {j}")
        if np.any(self.z[:, None] == self.y[None, :]):
            i, j = np.argwhere(self.z[:, None] == self.y[None, :])[0]
            raise NodeCollision(f"z[{i}] coincides with y[{j}]")

    @property
    def size(self) -> int:
        return len(self.z)

    @property
    def matrix(self) -> NDArray:
        return 1.0 / (self.z[:, None] - self.y[None, :])

    @property
    def min_gap(self) -> float:
        """Smallest distance between any two distinct nodes of the system"""
        gaps = [np.min(np.abs(self.z[:, None] - self.y[None, :]))]
        for nodes in (self.z, self.y):
            if len(nodes) > 1:
                gaps.append(np.min(np.abs(_off_diagonal(nodes)) + np.diag(np.full(len(nodes), np.inf))))
        return float(min(gaps))

    @property
    def dense(self) -> bool:
        return self.min_gap < CAUCHY_DENSE_GAP


def dense_det(system: CauchySystem) -> complex:
    """LU determinant with partial pivoting"""
    return complex(scipy.linalg.det(system.matrix))


def dense_inverse(system: CauchySystem) -> NDArray:
    return scipy.linalg.inv(system.matrix)


def det(system: CauchySystem) -> complex:
    """
    det A = Π_{i<j}(z_j − z_i)(y_i − y_j) / Π_{i,j}(z_i − y_j)

    Falls back to LU when some node gap is below the dense threshold.
    """
    if system.dense:
        logger.warning("node gap %.2e below %.0e, using dense determinant", system.min_gap, CAUCHY_DENSE_GAP)
        return dense_det(system)
    z, y = system.z, system.y
    upper = np.triu_indices(system.size, k=1)
    numer = np.prod((z[upper[1]] - z[upper[0]]) * (y[upper[0]] - y[upper[1]]))
    denom = np.prod(z[:, None] - y[None, :])
    return complex(numer / denom)


def inverse(system: CauchySystem) -> NDArray:
    """
    Explicit inverse B of A_ij = 1/(z_i − y_j)

    B_ij = Π_l (z_j − y_l) Π_{l≠j} (y_i − z_l) / [Π_{l≠j} (z_j − z_l) Π_{l≠i} (y_i − y_l)]
    """
    if system.dense:
        logger.warning("node gap %.2e below %.0e, using dense inverse", system.min_gap, CAUCHY_DENSE_GAP)
        return dense_inverse(system)
    z, y = system.z, system.y
    z_vs_y = np.prod(z[:, None] - y[None, :], axis=1)                 # Π_l (z_j − y_l)
    y_vs_z = y[:, None] - z[None, :]                                   # (y_i − z_l)
    z_gaps = np.prod(_off_diagonal(z), axis=1)                         # Π_{l≠j} (z_j − z_l)
    y_gaps = np.prod(_off_diagonal(y), axis=1)                         # Π_{l≠i} (y_i − y_l)
    all_y_vs_z = np.prod(y_vs_z, axis=1)
    # Π_{l≠j} (y_i − z_l) = Π_l (y_i − z_l) / (y_i − z_j)
    partial = all_y_vs_z[:, None] / y_vs_z
    return partial * z_vs_y[None, :] / (z_gaps[None, :] * y_gaps[:, None])


def solve(system: CauchySystem, rhs: ArrayLike) -> NDArray:
    """Solve A U = rhs by LU with partial pivoting"""
    factors = scipy.linalg.lu_factor(system.matrix)
    return scipy.linalg.lu_solve(factors, np.asarray(rhs, dtype=complex))


def recover_spins(samples: Sequence[Tuple[float, ArrayLike]],
                  poles: ArrayLike,
                  m0: ArrayLike,
                  tol: float = 1e-8) -> NDArray:
    """
    Recover spins from 2N field samples

    The unknowns U = (i s_1..i s_N, −i s̄_1..−i s̄_N) solve, per component,
    the Cauchy system with z = sample points and y = (poles, conjugate poles),
    right-hand side m(z_i) − m0. Conjugate pairing U_{N+k} = conj(U_k) is
    checked, then each spin is read off as the average of both estimates.

    Raises:
        ConjugacyViolation: the paired unknowns differ by more than tol
            relative to the largest unknown
    """
    poles = np.asarray(poles, dtype=complex).reshape(-1)
    n = len(poles)
    if n == 0:
        return np.zeros((0, 3), dtype=complex)
    if len(samples) != 2 * n:
        raise InvalidInput(f"need exactly {2 * n} samples for {n} poles, got {len(samples)}")
    if np.any(poles.imag <= 0):
        raise InvalidInput("poles must lie in the upper half-plane")

    points = np.array([float(x) for x, _ in samples])
    values = np.array([np.asarray(m, dtype=complex) for _, m in samples])
    system = CauchySystem(points, np.concatenate([poles, np.conj(poles)]))
    unknowns = solve(system, values - np.asarray(m0, dtype=float)[None, :])

    upper, lower = unknowns[:n], unknowns[n:]
    mismatch = float(np.max(np.abs(lower - np.conj(upper))))
    scale = max(1.0, float(np.max(np.abs(unknowns))))
    if mismatch > tol * scale:
        raise ConjugacyViolation(
            f"recovered unknowns are not conjugate pairs (mismatch {mismatch:.3e})", mismatch=mismatch)
    return -0.5j * (upper + np.conj(lower))


def _min_separation(state: SolitonState, eta: float):
    separation, j, k = separation_witness(state.poles)
    if separation < eta:
        raise SeparationViolation(
            f"poles {j} and {k} have Re-separation {separation:.3e} below {eta:.3e}", j, k, separation)
    return separation


def bound_witness(state: SolitonState, eta: float) -> float:
    """
    max_j |s_j| · min_i Im x_i

    Under Re-separation ≥ eta this product stays bounded along the flow.

    Raises:
        SeparationViolation: two real parts are closer than eta
    """
    if state.n == 0:
        return 0.0
    _min_separation(state, eta)
    norms = np.linalg.norm(state.spins, axis=1)
    return float(norms.max() * state.poles.imag.min())


def sample_nodes(state: SolitonState, eta: float, strategy: str = 'shifted') -> NDArray:
    """
    Real sample points for spin recovery

    offset: z_k = max Re x + k, k = 1..2N, all to the right of the poles.
    shifted: z_j = Re x_j + η/3 and z_{N+j} = Re x_j + 2η/3, next to each pole.
    """
    centres = state.poles.real
    if strategy == 'offset':
        return centres.max() + np.arange(1, 2 * state.n + 1, dtype=float)
    if strategy == 'shifted':
        return np.concatenate([centres + eta / 3.0, centres + 2.0 * eta / 3.0])
    raise InvalidInput(f"unknown node strategy {strategy!r}; choose from {NODE_STRATEGIES}")


def node_conditioning(state: SolitonState, eta: float, strategy: str = 'shifted') -> Dict:
    """Size of the recovery system's inverse for one node strategy"""
    if state.n == 0:
        raise InvalidInput("conditioning needs at least one pole")
    system = CauchySystem(sample_nodes(state, eta, strategy),
                          np.concatenate([state.poles, np.conj(state.poles)]))
    inv = inverse(system)
    return {
        'strategy': strategy,
        'max_inverse_entry': float(np.max(np.abs(inv))),
        'abs_det': abs(det(system)),
        'condition_number': float(np.linalg.cond(system.matrix)),
        'min_im': float(state.poles.imag.min()),
    }


def conditioning_report(state: SolitonState, eta: float) -> List[Dict]:
    return [node_conditioning(state, eta, strategy) for strategy in NODE_STRATEGIES]
