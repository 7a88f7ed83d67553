"""
Forces Module
Pairwise spin-pole interaction law shared by the integrator and the field
"""

import numpy as np
from numpy.typing import NDArray

from src.detectors import collision_witness
from src.errors import CoincidentPoles


def pair_powers(poles: NDArray, power: int) -> NDArray:
    """1/(x_j − x_k)^power with zeros on the diagonal"""
    diff = poles[:, None] - poles[None, :]
    np.fill_diagonal(diff, 1.0)
    result = diff ** (-power)
    np.fill_diagonal(result, 0.0)
    return result


def spin_pole_forces(poles: NDArray, spins: NDArray, check: bool = True):
    """
    ṡ_j = −2 Σ_{k≠j} (s_j × s_k)/(x_j − x_k)²
    ẍ_j = 4 Σ_{k≠j} (s_j·s_k)/(x_j − x_k)³

    Both sums are antisymmetric in (j, k), so Σ ṡ_j = 0 and Σ ẍ_j = 0.

    Returns:
        (spin derivatives of shape (N, 3), pole accelerations of shape (N,))
    """
    n = len(poles)
    if n < 2:
        return np.zeros((n, 3), dtype=complex), np.zeros(n, dtype=complex)
    if check:
        distance, j, k = collision_witness(poles)
        if distance == 0.0:
            raise CoincidentPoles(j, k)

    inv2 = pair_powers(poles, 2)
    inv3 = pair_powers(poles, 3)
    crosses = np.cross(spins[:, None, :], spins[None, :, :])
    spin_dot = -2.0 * np.einsum('jk,jkc->jc', inv2, crosses)
    accel = 4.0 * np.einsum('jk,jk->j', inv3, spins @ spins.T)
    return spin_dot, accel
