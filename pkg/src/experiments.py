"""
Experiments Module
Finite-horizon numerical probes of the two-soliton and separation results,
verdict reports recomputable from trajectory files, and parameter sweeps
"""

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src import settings
from src.asymptotics import TrajectoryFitter, two_body_asymptotics
from src.cauchy import bound_witness
from src.configuration import (SolitonState, VelocityMode, check_assumptions, random_admissible,
                               two_soliton_preset)
from src.data_loader import DataLoader
from src.detectors import EventFlag, EventKind, SituationClassifier, blow_up_witness, separation_witness
from src.dynamics import IntegratorOptions, SolitonIntegrator, TrajectoryRecord
from src.errors import ConfigError, InvalidInput

logger = logging.getLogger(__name__)

# Report statuses
WITNESSED = "witnessed"
NOT_WITNESSED = "not_witnessed"
OUTSIDE_HYPOTHESES = "outside_hypotheses"
TRUNCATED = "truncated"
VACUOUS = "vacuous"

# Verdict thresholds
SLOPE_TOLERANCE = 1e-3
GROWTH_RATE_LIMIT = 1e-3
GROWTH_RATIO_LIMIT = 10.0
MIN_IM_FRACTION = 0.1
VELOCITY_GAP = 1e-6
DRIFT_LIMIT = 1e-6

DEFAULT_MONITORS = ['min_im', 'min_sep', 'max_spin_norm', 'energy']

PRESET_DEFAULTS = {
    'two_soliton': {
        'v1': -0.5,
        'v2': 0.5,
        'heights': [1.0, 1.0],
        'velocity_mode': VelocityMode.CLOSURE.value,
        'separation': 6.0,
    },
    'random': {
        'n': 3,
        'spacing': 10.0,
        'speeds': None,
        'height_range': [0.75, 1.5],
    },
}

OVERRIDABLE_FIELDS = ('seed', 'horizon', 'nu', 'eta', 'eta_re', 'sample_dt', 'rtol', 'atol')


@dataclass
class ExperimentSpec:
    """
    One probe run: initial data (explicit state or preset + seed), horizon,
    event thresholds, monitors to tabulate and where to write outputs

    A horizon of None resolves to 50 for two poles and 20 otherwise.
    """

    name: str
    state: Optional[SolitonState] = None
    preset: Optional[Dict[str, Any]] = None
    seed: int = 0
    horizon: Optional[float] = None
    nu: float = settings.DEFAULT_NU_BLOWUP
    eta: float = settings.DEFAULT_ETA_COLLISION
    eta_re: float = settings.DEFAULT_ETA_RE
    sample_dt: float = settings.DEFAULT_SAMPLE_DT
    rtol: float = settings.DEFAULT_RTOL
    atol: float = settings.DEFAULT_ATOL
    monitors: List[str] = field(default_factory=lambda: list(DEFAULT_MONITORS))
    output_dir: Optional[str] = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ConfigError("experiment needs a name")
        if (self.state is None) == (self.preset is None):
            raise ConfigError("give exactly one of state or preset", name=self.name)
        if self.preset is not None:
            kind = self.preset.get('kind')
            if kind not in PRESET_DEFAULTS:
                raise ConfigError(f"unknown preset kind {kind!r}; choose from {sorted(PRESET_DEFAULTS)}")
            unknown = set(self.preset) - set(PRESET_DEFAULTS[kind]) - {'kind'}
            if unknown:
                raise ConfigError(f"unknown {kind} preset parameters: {sorted(unknown)}")
        if self.horizon is not None:
            settings.check_positive('horizon', self.horizon)
        for name in ('nu', 'eta', 'eta_re', 'sample_dt'):
            settings.check_positive(name, getattr(self, name))
        settings.check_tolerance('rtol', self.rtol)
        settings.check_tolerance('atol', self.atol)
        unknown = set(self.monitors) - set(MONITOR_COLUMNS)
        if unknown:
            raise ConfigError(f"unknown monitors: {sorted(unknown)}")

    def preset_parameters(self) -> Dict[str, Any]:
        kind = self.preset['kind']
        params = dict(PRESET_DEFAULTS[kind])
        params.update({key: value for key, value in self.preset.items() if key != 'kind'})
        return params

    def build_state(self) -> SolitonState:
        """Initial state: a copy of the explicit state or the preset built from the seed"""
        if self.state is not None:
            return self.state.copy()
        params = self.preset_parameters()
        if self.preset['kind'] == 'two_soliton':
            heights = params['heights']
            if np.ndim(heights) == 0:
                heights = [heights, heights]
            return two_soliton_preset(params['v1'], params['v2'], heights, self.seed,
                                      velocity_mode=VelocityMode(params['velocity_mode']),
                                      separation=params['separation'])
        return random_admissible(int(params['n']), self.seed, speeds=params['speeds'],
                                 spacing=params['spacing'], height_range=tuple(params['height_range']))

    def resolve_horizon(self, state: SolitonState) -> float:
        if self.horizon is not None:
            return float(self.horizon)
        return settings.TWO_SOLITON_HORIZON if state.n == 2 else settings.MANY_SOLITON_HORIZON

    def integrator_options(self, enforce_separation: bool = False) -> IntegratorOptions:
        return IntegratorOptions(rtol=self.rtol, atol=self.atol, nu_blowup=self.nu,
                                 eta_collision=self.eta, eta_re=self.eta_re,
                                 enforce_separation=enforce_separation, sample_dt=self.sample_dt)

    def with_overrides(self, overrides: Dict[str, Any]) -> 'ExperimentSpec':
        """Copy with spec fields and preset parameters replaced"""
        fields, preset = {}, dict(self.preset) if self.preset is not None else None
        for key, value in overrides.items():
            if key in OVERRIDABLE_FIELDS:
                fields[key] = value
            elif preset is not None and key in PRESET_DEFAULTS[preset['kind']]:
                preset[key] = value
            else:
                raise ConfigError(f"{key!r} is neither a spec field nor a preset parameter", field=key)
        return dataclasses.replace(self, preset=preset, **fields)

    def to_dict(self) -> Dict[str, Any]:
        doc = {
            'name': self.name,
            'seed': self.seed,
            'horizon': self.horizon,
            'nu': self.nu,
            'eta': self.eta,
            'eta_re': self.eta_re,
            'sample_dt': self.sample_dt,
            'rtol': self.rtol,
            'atol': self.atol,
            'monitors': list(self.monitors),
            'output_dir': self.output_dir,
        }
        if self.state is not None:
            doc['state'] = self.state.to_json_dict()
        else:
            doc['preset'] = dict(self.preset)
        return doc

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> 'ExperimentSpec':
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        values = dict(doc)
        if 'name' not in values:
            raise ConfigError("experiment document missing 'name'")
        if values.get('state') is not None:
            try:
                values['state'] = SolitonState.from_json_dict(values['state'])
            except InvalidInput as e:
                raise ConfigError(f"experiment state: {e.message}")
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"malformed experiment document: {e}")


@dataclass
class Verdict:
    """One monitored premise or conclusion; passed is None when not assessable"""

    name: str
    passed: Optional[bool]
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ''

    def to_dict(self) -> Dict[str, Any]:
        number = lambda v: None if v is None or not np.isfinite(v) else float(v)
        return {
            'name': self.name,
            'passed': self.passed,
            'value': number(self.value),
            'threshold': number(self.threshold),
            'detail': self.detail,
        }


@dataclass
class TheoremReport:
    """
    Premise and conclusion verdicts of one probe, witnessed up to the horizon

    The conclusion is only meaningful when every premise passed; a failed
    premise yields status outside_hypotheses rather than a failure.
    """

    theorem: str
    status: str
    premises: List[Verdict]
    conclusions: List[Verdict]
    horizon: float
    event: Optional[EventFlag] = None
    series: Dict[str, str] = field(default_factory=dict)
    notes: Dict[str, Any] = field(default_factory=dict)

    @property
    def premises_hold(self) -> bool:
        return all(v.passed for v in self.premises)

    @property
    def conclusion_witnessed(self) -> bool:
        return self.status == WITNESSED

    @property
    def passed(self) -> bool:
        return self.status in (WITNESSED, VACUOUS)

    def verdict(self, name: str) -> Verdict:
        for item in self.premises + self.conclusions:
            if item.name == name:
                return item
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'theorem': self.theorem,
            'status': self.status,
            'conclusion_witnessed': self.conclusion_witnessed,
            'horizon': self.horizon,
            'premises': [v.to_dict() for v in self.premises],
            'conclusions': [v.to_dict() for v in self.conclusions],
            'event': self.event.to_dict() if self.event else None,
            'series': dict(self.series),
            'notes': self.notes,
        }

    def to_text(self) -> str:
        mark = {True: 'PASS', False: 'FAIL', None: 'n/a '}
        lines = [f"{self.theorem}: {self.status} (horizon T={self.horizon:g})"]
        for title, items in (('premises', self.premises), ('conclusions', self.conclusions)):
            lines.append(f"  {title}:")
            for item in items:
                value = '' if item.value is None else f" value={item.value:.6g}"
                threshold = '' if item.threshold is None else f" threshold={item.threshold:.3g}"
                detail = f" ({item.detail})" if item.detail else ''
                lines.append(f"    [{mark[item.passed]}] {item.name}{value}{threshold}{detail}")
        if self.event is not None:
            lines.append(f"  event: {self.event.kind.value} at t={self.event.time:.10g} "
                         f"(poles {self.event.j}, {self.event.k})")
        return '\n'.join(lines)


MONITOR_COLUMNS = {
    'min_im': 'min_im',
    'min_sep': 'min_sep',
    'max_spin_norm': 'max_spin_norm',
    'energy': 'energy',
    'im_sum': 'im_sum',
    'spin_height_ratio': 'spin_height_ratio',
}


def monitor_table(record: TrajectoryRecord, monitors: Sequence[str]) -> pd.DataFrame:
    """Plot-ready series: time, pole coordinates and the requested monitors"""
    frame = record.to_frame()
    frame['spin_height_ratio'] = [snap.spin_height_ratio for snap in record.diagnostics()]
    poles = [c for c in frame.columns if c.startswith('x')]
    return frame[['t'] + poles + [MONITOR_COLUMNS[m] for m in monitors]]


def _status(premises: List[Verdict], conclusions: List[Verdict], event: Optional[EventFlag]) -> str:
    if not all(v.passed for v in premises):
        return OUTSIDE_HYPOTHESES
    if event is not None:
        return NOT_WITNESSED
    if any(v.passed is False for v in conclusions):
        return NOT_WITNESSED
    return WITNESSED


def _horizon(record: TrajectoryRecord) -> float:
    return float(record.final.t - record.initial.t)


def min_im_verdict(record: TrajectoryRecord, samples: Sequence[SolitonState], floor: float) -> Verdict:
    """min Im x over the samples against a lower bound; a located blow-up always fails"""
    value = float(min(blow_up_witness(sample.poles)[0] for sample in samples))
    blew_up = record.event is not None and record.event.kind == EventKind.BLOW_UP_APPROACH
    detail = f"crossed nu at t={record.event.time:.10g}" if blew_up else ''
    return Verdict('min_im_bounded_below', bool(value >= floor and not blew_up), value, floor, detail)


def _motion_verdicts(record: TrajectoryRecord) -> List[Verdict]:
    """Fitted late-time slopes against the exact asymptotic velocities"""
    initial = record.initial
    asymptotics = two_body_asymptotics(initial)
    if asymptotics.degenerate:
        reason = "relative motion has no linear asymptote"
        return [Verdict('asymptotic_velocity', None, detail=reason),
                Verdict('remainder_decay', None, detail=reason)]

    times = record.times
    window = times >= initial.t + _horizon(record) / 2.0
    if window.sum() < 6:
        reason = "too few samples in [T/2, T]"
        return [Verdict('asymptotic_velocity', None, detail=reason),
                Verdict('remainder_decay', None, detail=reason)]
    late = times[window]
    tracks = np.array([sample.poles for sample in record.samples])[window]

    fitter = TrajectoryFitter()
    slope_errors, decaying = [], True
    for j in range(2):
        fit = fitter.fit_linear_motion(late, tracks[:, j], with_decay=bool(np.all(late > 0)), key=f"x{j}")
        slope_errors.append(abs(fit['velocity'] - asymptotics.velocities[j]))
        remainder = np.abs(tracks[:, j] - (asymptotics.velocities[j] * late - asymptotics.offsets[j]))
        half = len(remainder) // 2
        early_mean, late_mean = remainder[:half].mean(), remainder[half:].mean()
        decaying = decaying and late_mean <= early_mean + 1e-9
    slope_error = float(max(slope_errors))
    return [
        Verdict('asymptotic_velocity', slope_error <= SLOPE_TOLERANCE, slope_error, SLOPE_TOLERANCE,
                "fit on [T/2, T] against exact two-body velocities"),
        Verdict('remainder_decay', bool(decaying), detail="|x_j - (v_j t - a_j)| shrinking over [T/2, T]"),
    ]


def growth_verdict(name: str, times: Sequence[float], series: Sequence[float]) -> Verdict:
    """
    No growth trend: the OLS slope of log(series) over the second half of
    the run is at most GROWTH_RATE_LIMIT per unit time, and the series never
    exceeds GROWTH_RATIO_LIMIT times its initial value
    """
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if len(series) < 3:
        return Verdict(name, None, detail="fewer than 3 samples")
    if np.any(series <= 0):
        return Verdict(name, None, detail="series has non-positive values")
    late = times >= times[0] + (times[-1] - times[0]) / 2.0
    if late.sum() < 3:
        late = np.ones(len(times), dtype=bool)
    trend = TrajectoryFitter().trend_slope(times[late], series[late], log=True)
    ratio = float(series.max() / series[0])
    passed = trend['slope'] <= GROWTH_RATE_LIMIT and ratio <= GROWTH_RATIO_LIMIT
    return Verdict(name, bool(passed), trend['slope'], GROWTH_RATE_LIMIT,
                   f"log-slope per unit time on [T/2, T], max/initial {ratio:.4g}")


def two_soliton_verdicts(record: TrajectoryRecord) -> TheoremReport:
    """
    Two-soliton probe report from a trajectory alone

    Premises: exactly two poles with distinct velocities. Conclusions:
    min Im x stays above a tenth of the smallest initial height, late-time
    linear motion at the exact asymptotic velocities with a shrinking
    remainder, no growth trend in the spin norms.
    """
    initial = record.initial
    two = initial.n == 2
    gap = float(abs(initial.velocities[0] - initial.velocities[1])) if two else None
    premises = [
        Verdict('two_solitons', two, float(initial.n), 2.0),
        Verdict('distinct_velocities', bool(two and gap > VELOCITY_GAP), gap, VELOCITY_GAP),
    ]

    floor = MIN_IM_FRACTION * float(initial.poles.imag.min()) if initial.n else record.options.nu_blowup
    conclusions = [min_im_verdict(record, record.samples, max(floor, record.options.nu_blowup))]
    if two and record.event is None:
        conclusions.extend(_motion_verdicts(record))
    norms = [snap.max_spin_norm for snap in record.diagnostics()]
    conclusions.append(growth_verdict('spin_norm_bounded', record.times, norms))

    report = TheoremReport('two_soliton_no_infinite_time_blowup',
                           _status(premises, conclusions, record.event),
                           premises, conclusions, _horizon(record), record.event)
    report.notes['min_im_initial'] = float(initial.poles.imag.min()) if initial.n else None
    below = record.event.time if (record.event and record.event.kind == EventKind.BLOW_UP_APPROACH) else None
    report.notes['min_im_crossing_time'] = below
    if two:
        report.notes['asymptotics'] = two_body_asymptotics(initial).to_dict()
    report.notes['situation'] = SituationClassifier(record.options.nu_blowup).classify(record)
    return report


def separation_verdicts(record: TrajectoryRecord) -> TheoremReport:
    """
    Separation probe report from a trajectory alone

    While every pair of real parts stays eta_re apart, min Im x must stay
    above nu and the spin-bound witness must stay bounded. When separation
    breaks the report is truncated there and judged on the prefix only.
    """
    initial = record.initial
    eta_re = record.options.eta_re
    if initial.n < 2:
        premises = [Verdict('at_least_two_poles', False, float(initial.n), 2.0)]
        report = TheoremReport('separation_no_blowup', VACUOUS, premises, [], _horizon(record), record.event)
        report.notes['reason'] = "fewer than two poles: the statement holds vacuously"
        return report

    separation0 = separation_witness(initial.poles)[0]
    premises = [
        Verdict('at_least_two_poles', True, float(initial.n), 2.0),
        Verdict('initially_separated', bool(separation0 >= eta_re), separation0, eta_re),
    ]
    if not premises[1].passed:
        return TheoremReport('separation_no_blowup', OUTSIDE_HYPOTHESES, premises, [],
                             _horizon(record), record.event)

    valid = []
    for sample in record.samples:
        if separation_witness(sample.poles)[0] < eta_re:
            break
        valid.append(sample)
    separation_event = record.event is not None and record.event.kind == EventKind.SEPARATION_VIOLATION
    truncated = separation_event or len(valid) < len(record.samples)

    bounds = [bound_witness(sample, eta_re) for sample in valid]
    conclusions = [
        min_im_verdict(record, valid, record.options.nu_blowup),
        growth_verdict('spin_bound_witness_bounded', [sample.t for sample in valid], bounds),
    ]
    other_event = record.event if (record.event is not None and not separation_event) else None
    status = _status(premises, conclusions, other_event)
    if status == WITNESSED and truncated:
        status = TRUNCATED

    horizon = float(valid[-1].t - initial.t)
    report = TheoremReport('separation_no_blowup', status, premises, conclusions, horizon, record.event)
    if truncated:
        report.notes['truncated_at'] = record.event.time if separation_event else float(record.samples[len(valid)].t)
    report.notes['situation'] = SituationClassifier(record.options.nu_blowup).classify(record)
    return report


VERDICTS = {
    'two-soliton': two_soliton_verdicts,
    'separation': separation_verdicts,
}


def _persist(spec: ExperimentSpec, record: TrajectoryRecord, report: TheoremReport) -> TheoremReport:
    if spec.output_dir is None:
        return report
    loader = DataLoader(spec.output_dir)
    trajectory = f"{spec.name}.jsonl"
    table = f"{spec.name}_series.csv"
    loader.write_trajectory(record, Path(spec.output_dir) / trajectory)
    loader.write_table(monitor_table(record, spec.monitors), table)
    report.series = {'trajectory': trajectory, 'table': table}
    loader.write_json(report.to_dict(), f"{spec.name}_report.json")
    loader.write_text(report.to_text(), f"{spec.name}_report.txt")
    return report


def _run(spec: ExperimentSpec, enforce_separation: bool) -> TrajectoryRecord:
    state = spec.build_state()
    horizon = spec.resolve_horizon(state)
    integrator = SolitonIntegrator(spec.integrator_options(enforce_separation))
    return integrator.integrate(state, state.t + horizon)


def run_two_soliton_probe(spec: ExperimentSpec) -> TheoremReport:
    """
    Integrate a two-pole state to the horizon and report the two-soliton
    verdicts; integrator errors propagate
    """
    record = _run(spec, enforce_separation=False)
    report = two_soliton_verdicts(record)
    report.notes['assumptions'] = check_assumptions(record.initial, spec.eta_re)
    logger.info("two-soliton probe %s: %s", spec.name, report.status)
    return _persist(spec, record, report)


def run_separation_probe(spec: ExperimentSpec) -> TheoremReport:
    """Integrate with the separation event armed and report the separation verdicts"""
    record = _run(spec, enforce_separation=True)
    report = separation_verdicts(record)
    logger.info("separation probe %s: %s", spec.name, report.status)
    return _persist(spec, record, report)


def recompute_report(path, probe: str = 'two-soliton') -> TheoremReport:
    """Re-derive a probe report from its JSONL trajectory"""
    if probe not in VERDICTS:
        raise InvalidInput(f"unknown probe {probe!r}; choose from {sorted(VERDICTS)}")
    record = DataLoader().read_trajectory(path)
    return VERDICTS[probe](record)


def _sweep_cell(template: ExperimentSpec, cell: Dict[str, Any]) -> Dict[str, Any]:
    row = dict(cell)
    try:
        spec = template.with_overrides(cell)
        record = _run(spec, enforce_separation=False)
        drift = record.drift()
        snaps = record.diagnostics()
        momentum_drift = max(drift['spin_sum'], drift['velocity_sum'])
        row.update({
            'status': 'ok',
            'error': None,
            'message': None,
            'n': record.initial.n,
            'final_t': float(record.final.t),
            'event': record.event.kind.value if record.event else None,
            'min_im': float(min(s.min_im for s in snaps)),
            'max_spin_norm': float(max(s.max_spin_norm for s in snaps)),
            'energy_drift': float(drift['energy_relative']),
            'momentum_drift': float(momentum_drift),
            'drift_ok': bool(momentum_drift <= DRIFT_LIMIT),
        })
    except Exception as e:
        logger.warning("sweep cell %s failed: %s", cell, e)
        row.update({'status': 'error', 'error': type(e).__name__, 'message': str(e)})
    return row


def sweep(template: ExperimentSpec, grid: Dict[str, List[Any]]) -> pd.DataFrame:
    """
    Run the template over the Cartesian product of the grid

    Each cell overrides spec fields or preset parameters. Cells run in
    parallel (HWM_THREADS caps the pool); a failing cell is recorded with
    its error and never aborts the sweep.

    Returns:
        DataFrame with one row per cell, in grid order
    """
    if not grid or any(len(values) == 0 for values in grid.values()):
        raise InvalidInput("sweep grid must be non-empty")
    names = list(grid)
    for name in names:
        template.with_overrides({name: grid[name][0]})
    cells = [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]

    logger.info("sweeping %d cells over %s", len(cells), names)
    rows = Parallel(n_jobs=settings.sweep_workers())(delayed(_sweep_cell)(template, cell) for cell in cells)
    df = pd.DataFrame(rows)

    if template.output_dir is not None:
        DataLoader(template.output_dir).write_table(df, f"{template.name}_sweep.csv")
    failed = int((df['status'] == 'error').sum())
    if failed:
        logger.warning("%d of %d sweep cells failed", failed, len(cells))
    return df
