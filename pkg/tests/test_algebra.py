"""
Tests for complex 3-vector arithmetic and null spins
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.algebra import (bilinear_dot, cross, hermitian_dot, is_null, make_null_spin, norm,
                         random_frame, random_null_spin, rotate_spins)
from src.errors import DegenerateFrame, InvalidInput

coordinate = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
complex_vec = st.lists(coordinate, min_size=6, max_size=6).map(
    lambda c: np.array(c[:3]) + 1j * np.array(c[3:]))
complex_scalar = st.tuples(coordinate, coordinate).map(lambda c: complex(*c))


class TestProducts:
    def test_bilinear_examples(self):
        assert bilinear_dot([1, 0, 0], [0, 1, 0]) == 0
        assert bilinear_dot([1, 1j, 0], [1, 1j, 0]) == 0
        assert bilinear_dot([1, 1j, 0], [1, -1j, 0]) == 2

    def test_hermitian_is_conjugated(self):
        s = np.array([1, 1j, 0])
        assert hermitian_dot(s, s) == pytest.approx(2.0)
        assert norm(s) == pytest.approx(np.sqrt(2.0))

    def test_cross_examples(self):
        np.testing.assert_allclose(cross([1, 0, 0], [0, 1, 0]), [0, 0, 1])
        np.testing.assert_allclose(cross([1, 1j, 0], [2, 2j, 0]), [0, 0, 0])
        np.testing.assert_allclose(cross([1, 1j, 0], [0, 0, 1]), [1j, -1, 0])

    def test_batched_products(self):
        spins = np.array([[1, 1j, 0], [0, 1, 1j]])
        np.testing.assert_allclose(bilinear_dot(spins, spins), [0, 0])
        assert cross(spins, spins).shape == (2, 3)

    @settings(max_examples=1000, derandomize=True, deadline=None)
    @given(complex_vec, complex_vec)
    def test_cross_is_orthogonal_to_factors(self, a, b):
        c = cross(a, b)
        scale = max(1.0, norm(a) ** 2 * norm(b))
        assert abs(bilinear_dot(a, c)) <= 1e-13 * scale * max(1.0, norm(a))
        assert abs(bilinear_dot(b, c)) <= 1e-13 * max(1.0, norm(a) * norm(b) ** 2)

    @settings(max_examples=1000, derandomize=True, deadline=None)
    @given(complex_vec, complex_vec, complex_vec, complex_scalar, complex_scalar)
    def test_cross_antisymmetric_and_bilinear(self, a, b, c, alpha, beta):
        np.testing.assert_allclose(cross(a, b), -cross(b, a), atol=1e-12)
        np.testing.assert_allclose(cross(a, a), 0, atol=1e-12)
        lhs = cross(alpha * a + beta * b, c)
        rhs = alpha * cross(a, c) + beta * cross(b, c)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.max(np.abs(rhs))))

    @settings(max_examples=200, derandomize=True, deadline=None)
    @given(complex_vec, complex_vec)
    def test_bilinear_symmetric(self, a, b):
        assert bilinear_dot(a, b) == pytest.approx(bilinear_dot(b, a))


class TestNullSpins:
    def test_basis_frame(self):
        np.testing.assert_allclose(make_null_spin([1, 0, 0], [0, 1, 0], 1.0), [1, 1j, 0])

    def test_parallel_frame_rejected(self):
        with pytest.raises(DegenerateFrame):
            make_null_spin([1, 0, 0], [1, 0, 0], 1.0)

    def test_zero_frame_rejected(self):
        with pytest.raises(DegenerateFrame):
            make_null_spin([0, 0, 0], [0, 1, 0], 1.0)

    def test_gram_schmidt_amplitude(self):
        # amplitude·(û + i v̂): both parts carry the full amplitude
        s = make_null_spin([1, 1, 0], [0, 1, 0], np.sqrt(2.0))
        assert np.linalg.norm(s.real) == pytest.approx(np.sqrt(2.0))
        assert np.linalg.norm(s.imag) == pytest.approx(np.sqrt(2.0))
        assert np.dot(s.real, s.imag) == pytest.approx(0.0, abs=1e-14)
        assert is_null(s)

    def test_bad_shape(self):
        with pytest.raises(InvalidInput):
            make_null_spin([1, 0], [0, 1], 1.0)

    @settings(max_examples=1000, derandomize=True, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1),
           st.floats(min_value=1e-3, max_value=1e3))
    def test_random_frames_give_null_spins(self, seed, amplitude):
        e1, e2 = random_frame(np.random.default_rng(seed))
        s = make_null_spin(e1, e2, amplitude)
        assert abs(bilinear_dot(s, s)) <= 1e-14 * abs(hermitian_dot(s, s))

    def test_frame_in_plane(self, rng):
        normal = np.array([0.3, -0.4, 0.5])
        e1, e2 = random_frame(rng, normal=normal)
        assert np.dot(e1, normal) == pytest.approx(0.0, abs=1e-14)
        assert np.dot(e2, normal) == pytest.approx(0.0, abs=1e-14)
        assert np.dot(e1, e2) == pytest.approx(0.0, abs=1e-14)

    def test_rotation_keeps_nullity(self, rng):
        spins = np.array([random_null_spin(rng, 2.0) for _ in range(4)])
        rotated = rotate_spins(spins, rng.normal(size=(4, 3)), rng.normal(size=4) * 0.1)
        np.testing.assert_allclose(bilinear_dot(rotated, rotated), 0, atol=1e-13)
