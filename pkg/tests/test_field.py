"""
Tests for closed-form field evaluation, the field-equation residual and the
principal-value oracle
"""

import numpy as np
import pytest

from src.configuration import SolitonState, VelocityMode, random_template, solve_admissible
from src.dynamics import IntegratorOptions, SolitonIntegrator
from src.errors import ConfigError
from src.field import (QuadratureSpec, chebyshev_points, eval_dm, eval_halfwave, eval_m, eval_m_complex,
                       eval_mt, field_scan, pde_residual, pv_oracle, sample_field)


class TestEvaluation:
    def test_constant_field(self, empty_state):
        xs = np.linspace(-5, 5, 7)
        np.testing.assert_array_equal(eval_m(empty_state, xs), np.tile([0, 0, 1], (7, 1)))
        np.testing.assert_array_equal(eval_halfwave(empty_state, xs), 0)
        np.testing.assert_array_equal(eval_mt(empty_state, xs), 0)
        assert pde_residual(empty_state, xs) == 0.0

    def test_canonical_value_at_origin(self, canonical_state):
        np.testing.assert_allclose(eval_m(canonical_state, 0.0), [-2.0, 0.0, 1.0], atol=1e-15)

    def test_scalar_and_vector_shapes(self, canonical_state):
        assert eval_m(canonical_state, 0.5).shape == (3,)
        assert eval_halfwave(canonical_state, [0.5, 1.0]).shape == (2, 3)

    def test_decay(self, receding_pair):
        total = np.abs(receding_pair.spins).sum()
        for x in (-1e6, 1e6):
            assert np.linalg.norm(eval_m(receding_pair, x) - receding_pair.m0) <= 3 * total / 1e6

    def test_conjugate_pairs_cancel(self, receding_pair):
        values = eval_m_complex(receding_pair, np.linspace(-20, 20, 101))
        bound = 1e-12 * (1 + np.sum(np.linalg.norm(receding_pair.spins, axis=1) / receding_pair.poles.imag))
        assert np.max(np.abs(values.imag)) <= bound
        np.testing.assert_allclose(values.real, eval_m(receding_pair, np.linspace(-20, 20, 101)), atol=1e-13)

    def test_unit_sphere(self, receding_pair, rng):
        xs = rng.uniform(-30, 30, 100)
        np.testing.assert_allclose(np.linalg.norm(eval_m(receding_pair, xs), axis=1), 1.0, atol=1e-8)

    def test_single_pole_time_derivative(self, moving_soliton):
        x = 0.7
        s, pole, v = moving_soliton.spins[0], moving_soliton.poles[0], moving_soliton.velocities[0]
        expected = -2 * np.imag(s * v / (x - pole) ** 2)
        np.testing.assert_allclose(eval_mt(moving_soliton, x), expected, atol=1e-15)

    def test_halfwave_is_linear(self, receding_pair):
        xs = np.linspace(-8, 8, 9)
        pieces = [SolitonState(receding_pair.m0, [receding_pair.poles[j]], [0j], [receding_pair.spins[j]])
                  for j in range(2)]
        total = eval_halfwave(pieces[0], xs) + eval_halfwave(pieces[1], xs)
        np.testing.assert_allclose(eval_halfwave(receding_pair, xs), total, atol=1e-14)

    def test_sample_field(self, moving_soliton):
        samples = sample_field(moving_soliton, [0.0, 1.0])
        assert len(samples) == 2
        assert set(samples[0].to_dict()) == {'x', 'm', 'halfwave', 'mt', 'residual'}


class TestPrincipalValue:
    def test_empty_state(self, empty_state):
        np.testing.assert_array_equal(pv_oracle(empty_state, 0.0), 0)

    def test_canonical_state_matches_closed_form(self, canonical_state):
        np.testing.assert_allclose(pv_oracle(canonical_state, 0.0), eval_halfwave(canonical_state, 0.0),
                                   atol=1e-6)

    def test_off_centre_point(self, receding_pair):
        np.testing.assert_allclose(pv_oracle(receding_pair, 1.3), eval_halfwave(receding_pair, 1.3), atol=1e-6)

    def test_refinement_converges(self, canonical_state):
        exact = eval_halfwave(canonical_state, 0.3)
        errors = [np.max(np.abs(pv_oracle(canonical_state, 0.3, QuadratureSpec(nodes=nodes)) - exact))
                  for nodes in (11, 21, 41)]
        # 101 nodes already sit at the quadrature floor
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-5

    def test_bad_grid(self):
        with pytest.raises(ConfigError):
            QuadratureSpec(window=10.0, half_width=1.0)


class TestResidual:
    def test_chebyshev_points(self):
        points = chebyshev_points(-20, 20, 41)
        assert points[0] == pytest.approx(-20) and points[-1] == pytest.approx(20)
        assert np.all(np.diff(points) > 0)

    def test_admissible_pair_solves_equation(self, receding_pair):
        assert pde_residual(receding_pair, chebyshev_points(-20, 20, 41)) <= 1e-6

    def test_single_soliton_solves_equation(self, moving_soliton):
        assert pde_residual(moving_soliton, chebyshev_points(-20, 20, 41)) <= 1e-12

    def test_corrupted_spin_detected(self, receding_pair):
        spins = receding_pair.spins.copy()
        spins[0] *= 2
        corrupted = receding_pair.replace(spins=spins)
        assert pde_residual(corrupted, chebyshev_points(-20, 20, 41)) > 1e-2

    def test_residual_follows_solver_tolerance(self):
        template = random_template(2, seed=5, spacing=5.0)
        residuals = []
        for tol in (1e-4, 1e-6, 1e-8):
            state = solve_admissible(template, tol=tol, velocities=VelocityMode.CLOSURE)
            residuals.append(pde_residual(state, chebyshev_points(-20, 20, 41)))
        assert residuals[2] <= residuals[0] + 1e-12

    def test_finite_difference_in_time(self, receding_pair):
        h = 1e-5
        options = IntegratorOptions(sample_dt=h)
        record = SolitonIntegrator(options).integrate(receding_pair, receding_pair.t + 2 * h)
        before, middle, after = record.samples[0], record.samples[1], record.samples[2]
        xs = np.linspace(-6, 6, 13)
        difference = (eval_m(after, xs) - eval_m(before, xs)) / (2 * h)
        np.testing.assert_allclose(difference, eval_mt(middle, xs), atol=1e-7)

    def test_derivative_matches_difference(self, canonical_state):
        h = 1e-6
        difference = (eval_m(canonical_state, 0.4 + h) - eval_m(canonical_state, 0.4 - h)) / (2 * h)
        np.testing.assert_allclose(eval_dm(canonical_state, 0.4), difference, atol=1e-8)

    def test_field_scan(self, receding_pair):
        df = field_scan(receding_pair, -10, 10, 21)
        assert list(df.columns) == ['x', 'm1', 'm2', 'm3', 'residual_norm']
        assert len(df) == 21
        assert df['residual_norm'].max() <= 1e-6
