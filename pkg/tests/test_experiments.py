"""
Tests for experiment specs, probe reports and parameter sweeps
"""

import json

import numpy as np
import pytest

from conftest import DATA_DIR
from src.configuration import SolitonState
from src.data_loader import DataLoader
from src.detectors import EventKind
from src.dynamics import IntegratorOptions, TrajectoryRecord
from src.errors import ConfigError, InvalidInput
from src.experiments import (NOT_WITNESSED, OUTSIDE_HYPOTHESES, TRUNCATED, VACUOUS, WITNESSED,
                             ExperimentSpec, TheoremReport, Verdict, growth_verdict, min_im_verdict,
                             recompute_report, run_separation_probe, run_two_soliton_probe, sweep)


def two_soliton_spec(**overrides):
    preset = {'kind': 'two_soliton', 'v1': -0.5, 'v2': 0.5, 'heights': [1.0, 1.0], 'velocity_mode': 'closure'}
    preset.update(overrides.pop('preset', {}))
    return ExperimentSpec(name=overrides.pop('name', 'pair'), preset=preset, seed=overrides.pop('seed', 7),
                          **overrides)


class TestExperimentSpec:
    def test_needs_exactly_one_source(self, moving_soliton):
        with pytest.raises(ConfigError):
            ExperimentSpec(name='none')
        with pytest.raises(ConfigError):
            ExperimentSpec(name='both', state=moving_soliton, preset={'kind': 'random'})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(name='bad', preset={'kind': 'three_soliton'})
        with pytest.raises(ConfigError, match='unknown two_soliton preset parameters'):
            ExperimentSpec(name='bad', preset={'kind': 'two_soliton', 'speed': 0.2})

    def test_field_checks(self):
        with pytest.raises(ConfigError):
            two_soliton_spec(horizon=-1.0)
        with pytest.raises(ConfigError):
            two_soliton_spec(rtol=0.5)
        with pytest.raises(ConfigError):
            two_soliton_spec(monitors=['vorticity'])

    def test_horizon_defaults(self, moving_soliton, receding_pair):
        spec = ExperimentSpec(name='single', state=moving_soliton)
        assert spec.resolve_horizon(moving_soliton) == 20.0
        assert spec.resolve_horizon(receding_pair) == 50.0
        assert two_soliton_spec(horizon=3.0).resolve_horizon(receding_pair) == 3.0

    def test_overrides(self):
        spec = two_soliton_spec().with_overrides({'v2': 0.25, 'seed': 3, 'horizon': 4.0})
        assert spec.preset['v2'] == 0.25
        assert spec.seed == 3 and spec.horizon == 4.0
        with pytest.raises(ConfigError):
            two_soliton_spec().with_overrides({'colour': 'red'})

    def test_dict_round_trip(self, moving_soliton):
        for spec in (two_soliton_spec(horizon=5.0), ExperimentSpec(name='single', state=moving_soliton)):
            restored = ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
            assert restored.to_dict() == spec.to_dict()

    def test_unknown_document_field(self):
        with pytest.raises(ConfigError):
            ExperimentSpec.from_dict({'name': 'x', 'preset': {'kind': 'random'}, 'colour': 'red'})

    def test_scalar_heights(self):
        state = two_soliton_spec(preset={'heights': 2.0}).build_state()
        np.testing.assert_allclose(state.poles.imag, [2.0, 2.0])

    def test_loads_shipped_specs(self):
        loader = DataLoader()
        for name in ('two_soliton_probe.json', 'separation_probe.json', 'near_collision_probe.json'):
            spec = loader.load_spec(DATA_DIR / name)
            assert spec.preset is not None


class TestReport:
    def test_status_flags(self):
        report = TheoremReport('t', VACUOUS, [], [], 1.0)
        assert report.passed and not report.conclusion_witnessed
        assert TheoremReport('t', WITNESSED, [], [], 1.0).conclusion_witnessed
        assert not TheoremReport('t', NOT_WITNESSED, [], [], 1.0).passed

    def test_verdict_lookup(self):
        report = TheoremReport('t', WITNESSED, [Verdict('p', True)], [Verdict('c', None, detail='skipped')], 1.0)
        assert report.verdict('c').detail == 'skipped'
        with pytest.raises(KeyError):
            report.verdict('missing')
        assert '[n/a ] c' in report.to_text()

    def test_non_finite_values_serialise_as_null(self):
        assert Verdict('v', True, float('inf'), 1.0).to_dict()['value'] is None


def dipping_record(heights):
    spins = [[1, 1j, 0], [0, 1, 1j]]
    samples = [SolitonState([0, 0, 1], [complex(-5, h), complex(5, 1)], [0j, 0j], spins, t)
               for t, h in enumerate(heights)]
    return TrajectoryRecord(samples, IntegratorOptions())


class TestVerdicts:
    def test_min_im_below_floor_fails(self):
        record = dipping_record([1.0, 0.0968, 0.5])
        verdict = min_im_verdict(record, record.samples, 0.1)
        assert verdict.passed is False
        assert verdict.value == pytest.approx(0.0968)
        assert verdict.threshold == 0.1

    def test_min_im_above_floor_passes(self):
        record = dipping_record([1.0, 0.2, 0.5])
        assert min_im_verdict(record, record.samples, 0.1).passed is True

    def test_exponential_growth_fails(self):
        times = np.linspace(0.0, 20.0, 201)
        verdict = growth_verdict('norm', times, np.exp(0.1 * times))
        assert verdict.passed is False
        assert verdict.value == pytest.approx(0.1, rel=1e-6)

    def test_slow_growth_fails(self):
        # ratio stays far below the cap, the trend alone fails
        times = np.linspace(0.0, 20.0, 201)
        verdict = growth_verdict('norm', times, np.exp(0.01 * times))
        assert verdict.passed is False
        assert verdict.value == pytest.approx(0.01, rel=1e-6)

    def test_settling_series_passes(self):
        times = np.linspace(0.0, 50.0, 501)
        verdict = growth_verdict('norm', times, 1.0 + 0.3 * (1.0 - np.exp(-times)))
        assert verdict.passed is True
        assert verdict.value <= 1e-3

    def test_not_assessable(self):
        assert growth_verdict('norm', [0.0, 1.0], [1.0, 1.0]).passed is None
        assert growth_verdict('norm', [0.0, 1.0, 2.0], [1.0, 0.0, 1.0]).passed is None


class TestTwoSolitonProbe:
    @pytest.fixture(scope='class')
    def probe(self, tmp_path_factory):
        out = tmp_path_factory.mktemp('two_soliton')
        spec = DataLoader().load_spec(DATA_DIR / 'two_soliton_probe.json')
        spec.output_dir = str(out)
        return spec, run_two_soliton_probe(spec), out

    def test_witnessed(self, probe):
        _, report, _ = probe
        assert report.status == WITNESSED
        assert report.premises_hold
        assert report.verdict('asymptotic_velocity').passed
        assert report.verdict('remainder_decay').passed
        assert report.verdict('min_im_bounded_below').value > 0.5
        assert report.verdict('min_im_bounded_below').threshold == pytest.approx(0.1)
        assert report.verdict('spin_norm_bounded').value <= 1e-3
        assert report.horizon == pytest.approx(50.0)

    def test_notes(self, probe):
        _, report, _ = probe
        assert report.notes['min_im_crossing_time'] is None
        assert report.notes['assumptions']['distinct_velocities']
        assert report.notes['situation']['situation'] == 'non_turbulent_up_to_T'

    def test_outputs_written(self, probe):
        spec, report, out = probe
        assert report.series == {'trajectory': 'two_soliton.jsonl', 'table': 'two_soliton_series.csv'}
        for name in ('two_soliton.jsonl', 'two_soliton_series.csv', 'two_soliton_report.json',
                     'two_soliton_report.txt'):
            assert (out / name).is_file()
        doc = json.loads((out / 'two_soliton_report.json').read_text())
        assert doc['status'] == WITNESSED

    def test_report_recomputes_from_trajectory(self, probe):
        _, report, out = probe
        again = recompute_report(out / 'two_soliton.jsonl', 'two-soliton')
        assert again.status == report.status
        assert [v.to_dict() for v in again.premises] == [v.to_dict() for v in report.premises]
        assert [v.to_dict() for v in again.conclusions] == [v.to_dict() for v in report.conclusions]

    def test_unknown_probe(self, probe):
        _, _, out = probe
        with pytest.raises(InvalidInput):
            recompute_report(out / 'two_soliton.jsonl', 'three-soliton')

    def test_equal_velocities_are_outside_hypotheses(self):
        spec = two_soliton_spec(preset={'v1': 0.0, 'v2': 0.0, 'velocity_mode': 'given'}, seed=0, horizon=2.0)
        report = run_two_soliton_probe(spec)
        assert report.status == OUTSIDE_HYPOTHESES
        assert report.verdict('distinct_velocities').passed is False
        assert not report.passed

    def test_single_pole_is_outside_hypotheses(self, moving_soliton):
        report = run_two_soliton_probe(ExperimentSpec(name='single', state=moving_soliton, horizon=2.0))
        assert report.status == OUTSIDE_HYPOTHESES
        assert report.verdict('two_solitons').passed is False

    @pytest.mark.slow
    @pytest.mark.parametrize('v1, v2', [(-1.0, 1.0), (1.0, -1.0)])
    def test_unit_speed_pair(self, v1, v2):
        spec = two_soliton_spec(preset={'v1': v1, 'v2': v2, 'velocity_mode': 'given'}, horizon=50.0)
        report = run_two_soliton_probe(spec)
        verdict = report.verdict('min_im_bounded_below')
        assert verdict.threshold == pytest.approx(0.1)
        crossed = report.notes['min_im_crossing_time'] is not None
        assert verdict.passed == (verdict.value >= 0.1 and not crossed)
        if not verdict.passed:
            assert report.status == NOT_WITNESSED

    def test_tiny_height(self):
        spec = two_soliton_spec(preset={'heights': [1e-3, 1.0], 'velocity_mode': 'given'}, seed=2, horizon=1.0)
        report = run_two_soliton_probe(spec)
        assert report.notes['min_im_initial'] == pytest.approx(1e-3)
        assert 'min_im_crossing_time' in report.notes


class TestSeparationProbe:
    def test_three_separated_poles(self, tmp_path):
        spec = DataLoader().load_spec(DATA_DIR / 'separation_probe.json')
        spec.output_dir = str(tmp_path)
        report = run_separation_probe(spec)
        assert report.status == WITNESSED
        assert report.premises_hold
        assert report.event is None
        assert report.verdict('min_im_bounded_below').passed
        assert report.verdict('spin_bound_witness_bounded').passed
        assert report.verdict('spin_bound_witness_bounded').value <= 1e-3
        table = (tmp_path / 'separation_n3_series.csv').read_text().splitlines()[0]
        assert 'spin_height_ratio' in table

    def test_near_collision_is_truncated(self):
        spec = DataLoader().load_spec(DATA_DIR / 'near_collision_probe.json')
        report = run_separation_probe(spec)
        assert report.status == TRUNCATED
        assert report.event.kind == EventKind.SEPARATION_VIOLATION
        assert report.notes['truncated_at'] == pytest.approx(report.event.time)
        assert report.horizon < 20.0

    def test_single_pole_is_vacuous(self, moving_soliton):
        report = run_separation_probe(ExperimentSpec(name='single', state=moving_soliton, horizon=2.0))
        assert report.status == VACUOUS
        assert report.passed

    def test_initially_unseparated(self, receding_pair):
        report = run_separation_probe(ExperimentSpec(name='close', state=receding_pair, horizon=1.0, eta_re=10.0))
        assert report.status == OUTSIDE_HYPOTHESES


class TestSweep:
    def test_shipped_grid(self, tmp_path, monkeypatch):
        monkeypatch.setenv('HWM_THREADS', '1')
        template_doc, grid = DataLoader().load_grid(DATA_DIR / 'two_soliton_sweep.json')
        template = ExperimentSpec.from_dict(template_doc)
        template.output_dir = str(tmp_path)
        df = sweep(template, grid)
        assert len(df) == 9
        assert (df['status'] == 'ok').all()
        assert df['drift_ok'].all()
        assert list(df['v2'][:3]) == [-2.0, -2.0, -2.0]
        assert (tmp_path / 'two_soliton_grid_sweep.csv').is_file()

    def test_failing_cell_is_recorded(self, monkeypatch):
        monkeypatch.setenv('HWM_THREADS', '1')
        df = sweep(two_soliton_spec(horizon=1.0), {'v2': [0.3, 0.5, 1.5]})
        assert list(df['status']) == ['ok', 'ok', 'error']
        assert df.loc[2, 'error'] == 'InvalidInput'
        assert df.loc[0, 'drift_ok']

    def test_unknown_grid_key(self):
        with pytest.raises(ConfigError):
            sweep(two_soliton_spec(), {'colour': ['red']})

    def test_empty_grid(self):
        with pytest.raises(InvalidInput):
            sweep(two_soliton_spec(), {})
