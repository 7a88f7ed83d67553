"""
Algebra Module
Complex 3-vector arithmetic for spins: bilinear and Hermitian products,
cross products and null-spin construction
"""

import logging
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation

from src.errors import DegenerateFrame, InvalidInput

logger = logging.getLogger(__name__)

# A complex 3-vector is a complex128 array of shape (3,); batches stack on
# the leading axes, so every product below works on (..., 3) arrays.
ComplexVec3 = NDArray[np.complex128]

# Relative size below which a Gram-Schmidt remainder counts as zero
FRAME_TOLERANCE = 1e-12


def as_vec3(values: ArrayLike, name: str = 'vector') -> ComplexVec3:
    """Coerce to a finite complex (..., 3) array"""
    vec = np.asarray(values, dtype=np.complex128)
    if vec.ndim == 0 or vec.shape[-1] != 3:
        raise InvalidInput(f"{name} must have 3 components, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise InvalidInput(f"{name} has non-finite components")
    return vec


def bilinear_dot(a: ArrayLike, b: ArrayLike) -> Union[complex, NDArray]:
    """
    Bilinear product a·b = Σ a_i b_i (no conjugation)

    Null spins are exactly the vectors with s·s = 0.
    """
    result = np.einsum('...i,...i->...', np.asarray(a), np.asarray(b))
    return complex(result) if np.ndim(result) == 0 else result


def hermitian_dot(a: ArrayLike, b: ArrayLike) -> Union[complex, NDArray]:
    """Hermitian product a·b̄ = Σ a_i conj(b_i); real and ≥ 0 when a = b"""
    result = np.einsum('...i,...i->...', np.asarray(a), np.conj(np.asarray(b)))
    return complex(result) if np.ndim(result) == 0 else result


def cross(a: ArrayLike, b: ArrayLike) -> ComplexVec3:
    """Cross product extended bilinearly to complex vectors"""
    return np.cross(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def norm(a: ArrayLike) -> Union[float, NDArray]:
    """Hermitian norm |a| = sqrt(a·ā)"""
    result = np.sqrt(np.real(hermitian_dot(a, a)))
    return float(result) if np.ndim(result) == 0 else result


def null_residual(s: ArrayLike) -> Union[float, NDArray]:
    """|s·s|, zero exactly for null spins"""
    result = np.abs(bilinear_dot(s, s))
    return float(result) if np.ndim(result) == 0 else result


def is_null(s: ArrayLike, tol: float = 1e-12) -> bool:
    """
    Check the null-spin refinement: |Re s| = |Im s| and Re s ⊥ Im s

    Both conditions are the real and imaginary parts of s·s = 0; the
    tolerance is relative to |s|².
    """
    s = as_vec3(s, 'spin')
    scale = max(1.0, float(np.real(hermitian_dot(s, s))))
    return null_residual(s) <= tol * scale


def make_null_spin(u: Sequence[float], v: Sequence[float], amplitude: float) -> ComplexVec3:
    """
    Build amplitude·(û + i v̂) from a real frame by Gram-Schmidt

    Args:
        u: first frame vector (direction of Re s)
        v: second frame vector, orthogonalised against u (direction of Im s)
        amplitude: common length of Re s and Im s

    Raises:
        DegenerateFrame: u is zero or v is parallel to u
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (3,) or v.shape != (3,):
        raise InvalidInput("frame vectors must be real 3-vectors")

    u_len = np.linalg.norm(u)
    if u_len == 0.0:
        raise DegenerateFrame("first frame vector is zero")
    u_hat = u / u_len

    v_perp = v - np.dot(v, u_hat) * u_hat
    v_len = np.linalg.norm(v_perp)
    if v_len <= FRAME_TOLERANCE * max(1.0, np.linalg.norm(v)):
        raise DegenerateFrame("frame vectors are parallel")
    v_hat = v_perp / v_len

    return amplitude * (u_hat + 1j * v_hat)


def random_frame(rng: np.random.Generator, normal: NDArray = None):
    """
    Random orthonormal pair (e1, e2)

    With ``normal`` given, both vectors lie in the plane orthogonal to it.
    """
    if normal is None:
        quat = rng.normal(size=4)
        basis = Rotation.from_quat(quat / np.linalg.norm(quat)).as_matrix()
        return basis[:, 0], basis[:, 1]

    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    # Any vector not parallel to the normal seeds the plane
    seed = np.eye(3)[int(np.argmin(np.abs(normal)))]
    e1 = seed - np.dot(seed, normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return (np.cos(angle) * e1 + np.sin(angle) * e2,
            -np.sin(angle) * e1 + np.cos(angle) * e2)


def random_null_spin(rng: np.random.Generator, amplitude: float = 1.0) -> ComplexVec3:
    e1, e2 = random_frame(rng)
    return make_null_spin(e1, e2, amplitude)


def rotate_spins(spins: NDArray, rotvecs: NDArray, log_amplitudes: NDArray) -> NDArray:
    """
    Apply s_j ← exp(λ_j) R(ω_j) s_j row by row

    Rotating real and imaginary parts by the same proper rotation keeps
    s·s = 0 exactly, so this is the nullity-preserving chart of the
    constraint solver.
    """
    spins = np.asarray(spins, dtype=np.complex128)
    if len(spins) == 0:
        return spins.copy()
    rot = Rotation.from_rotvec(np.asarray(rotvecs, dtype=float).reshape(-1, 3))
    scale = np.exp(np.asarray(log_amplitudes, dtype=float))[:, None]
    return scale * (rot.apply(spins.real) + 1j * rot.apply(spins.imag))
