"""
Tests for the two-body reduction and the trajectory fits
"""

import numpy as np
import pytest

from src.asymptotics import TrajectoryFitter, two_body_asymptotics, two_body_positions
from src.configuration import SolitonState
from src.errors import InvalidInput


@pytest.fixture
def parallel_pair():
    """Parallel null spins: g = 0, so both poles move freely"""
    s = np.array([1, 1j, 0])
    return SolitonState([0, 0, 1], [1j, 3 + 1j], [0.2, 0.2], [s, 2 * s])


class TestTwoBodyPositions:
    def test_initial_positions(self, receding_pair):
        np.testing.assert_allclose(two_body_positions(receding_pair, [receding_pair.t])[0],
                                   receding_pair.poles, atol=1e-12)

    def test_relative_coordinate_squared_is_quadratic(self, receding_pair):
        times = np.linspace(0, 30, 7)
        tracks = two_body_positions(receding_pair, times)
        r = tracks[:, 0] - tracks[:, 1]
        r0 = receding_pair.poles[0] - receding_pair.poles[1]
        rdot0 = receding_pair.velocities[0] - receding_pair.velocities[1]
        two_e = two_body_asymptotics(receding_pair).relative_energy
        np.testing.assert_allclose(r ** 2, r0 ** 2 + 2 * r0 * rdot0 * times + two_e * times ** 2, rtol=1e-10)

    def test_centre_moves_uniformly(self, receding_pair):
        times = np.linspace(0, 10, 5)
        centre = two_body_positions(receding_pair, times).sum(axis=1)
        expected = receding_pair.poles.sum() + receding_pair.velocities.sum() * times
        np.testing.assert_allclose(centre, expected, atol=1e-12)

    def test_free_pair(self, parallel_pair):
        tracks = two_body_positions(parallel_pair, [2.0])[0]
        np.testing.assert_allclose(tracks, parallel_pair.poles + 0.4, atol=1e-12)

    def test_needs_two_poles(self, moving_soliton):
        with pytest.raises(InvalidInput):
            two_body_positions(moving_soliton, [1.0])


class TestTwoBodyAsymptotics:
    def test_receding_pair(self, receding_pair):
        law = two_body_asymptotics(receding_pair)
        assert not law.degenerate
        assert law.collision_time is None
        assert sum(law.velocities) == pytest.approx(receding_pair.velocities.sum(), abs=1e-12)
        assert sum(law.offsets) == pytest.approx(-receding_pair.poles.sum(), abs=1e-10)

    def test_linear_law_at_large_time(self, receding_pair):
        law = two_body_asymptotics(receding_pair)
        t = 1e4
        exact = two_body_positions(receding_pair, [t])[0]
        predicted = np.array([v * t - a for v, a in zip(law.velocities, law.offsets)])
        np.testing.assert_allclose(exact, predicted, atol=1e-2)

    def test_degenerate_relative_motion(self, parallel_pair):
        law = two_body_asymptotics(parallel_pair)
        assert law.degenerate
        assert law.offsets is None
        assert law.collision_time is None
        assert law.to_dict()['offsets'] is None

    def test_dict_fields(self, receding_pair):
        doc = two_body_asymptotics(receding_pair).to_dict()
        assert set(doc) == {'velocities', 'offsets', 'coupling', 'relative_energy', 'collision_time'}


class TestTrajectoryFitter:
    def test_recovers_linear_motion(self):
        times = np.linspace(5, 50, 60)
        track = (0.3 + 0.1j) * times - (1 - 2j) + 0.5j / times
        fit = TrajectoryFitter().fit_linear_motion(times, track, key='x0')
        assert fit['velocity'] == pytest.approx(0.3 + 0.1j, abs=1e-9)
        assert fit['offset'] == pytest.approx(1 - 2j, abs=1e-8)
        assert fit['decay'] == pytest.approx(0.5j, abs=1e-7)
        assert fit['rmse'] <= 1e-9

    def test_stores_models_by_key(self):
        fitter = TrajectoryFitter()
        times = np.linspace(1, 5, 5)
        fitter.fit_linear_motion(times, times * (1 + 1j), key='x1')
        assert set(fitter.models) == {'x1_re', 'x1_im'}

    def test_input_checks(self):
        fitter = TrajectoryFitter()
        with pytest.raises(InvalidInput):
            fitter.fit_linear_motion([1.0, 2.0], [1j, 2j])
        with pytest.raises(InvalidInput):
            fitter.fit_linear_motion([0.0, 1.0, 2.0], [1j, 2j, 3j])

    def test_exponential_trend(self):
        times = np.linspace(0, 20, 41)
        trend = TrajectoryFitter().trend_slope(times, np.exp(-0.1 * times))
        assert trend['slope'] == pytest.approx(-0.1, abs=1e-10)
        assert trend['r_squared'] == pytest.approx(1.0)

    def test_linear_trend(self):
        times = np.linspace(0, 10, 11)
        trend = TrajectoryFitter().trend_slope(times, 2.0 * times + 1.0, log=False)
        assert trend['slope'] == pytest.approx(2.0)
        assert trend['intercept'] == pytest.approx(1.0)

    def test_log_trend_needs_positive_values(self):
        with pytest.raises(InvalidInput):
            TrajectoryFitter().trend_slope([0, 1, 2], [1.0, 0.0, 1.0])

    def test_fit_quality(self):
        quality = TrajectoryFitter.fit_quality([1.0, 2.0, 3.0], [1.0, 2.0, 5.0])
        assert quality['max_error'] == 2.0
        assert quality['mae'] == pytest.approx(2.0 / 3.0)
