"""
Dynamics Module
Spin-pole equations of motion and an adaptive Dormand-Prince 5(4) integrator
with PI step control, dense output and event location
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.integrate import RK45
from scipy.optimize import bisect

from src import settings
from src.configuration import SolitonState, validate
from src.conserved import ConservedSnapshot, snapshot
from src.detectors import (EventFlag, EventKind, blow_up_witness, collision_witness,
                           separation_witness)
from src.errors import ConfigError, ConstraintViolation, IntegrationError, InvalidInput, StepSizeUnderflow
from src.forces import spin_pole_forces

logger = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau; the system is autonomous so the nodes c_i are not needed
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# PI controller exponents and limits
_ALPHA = 0.17
_BETA = 0.04
_SAFETY = 0.9
_GROW_MAX = 10.0
_SHRINK_MIN = 0.2

EVENT_TIME_TOL = 1e-10


def to_phase(state: SolitonState) -> NDArray:
    """Flatten to (Re x, Im x, Re ẋ, Im ẋ, Re s, Im s), length 10N"""
    return np.concatenate([state.poles.real, state.poles.imag,
                           state.velocities.real, state.velocities.imag,
                           state.spins.real.ravel(), state.spins.imag.ravel()])


def _unpack(y: NDArray, n: int):
    poles = y[0:n] + 1j * y[n:2 * n]
    velocities = y[2 * n:3 * n] + 1j * y[3 * n:4 * n]
    spins = (y[4 * n:7 * n] + 1j * y[7 * n:10 * n]).reshape(n, 3)
    return poles, velocities, spins


def from_phase(y: NDArray, m0: NDArray, t: float) -> SolitonState:
    """Inverse of to_phase"""
    y = np.asarray(y, dtype=float)
    if len(y) % 10:
        raise InvalidInput(f"phase vector length {len(y)} is not a multiple of 10")
    poles, velocities, spins = _unpack(y, len(y) // 10)
    return SolitonState(m0, poles, velocities, spins, t)


def _phase_rhs(y: NDArray, n: int) -> NDArray:
    poles, velocities, spins = _unpack(y, n)
    with np.errstate(all='ignore'):
        spin_dot, accel = spin_pole_forces(poles, spins, check=False)
    return np.concatenate([velocities.real, velocities.imag, accel.real, accel.imag,
                           spin_dot.real.ravel(), spin_dot.imag.ravel()])


def rhs(state: SolitonState) -> NDArray:
    """
    Time derivative of the phase vector

    Raises:
        CoincidentPoles: two poles coincide
    """
    spin_dot, accel = spin_pole_forces(state.poles, state.spins)
    return np.concatenate([state.velocities.real, state.velocities.imag, accel.real, accel.imag,
                           spin_dot.real.ravel(), spin_dot.imag.ravel()])


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances, event thresholds and sampling of an integration run"""

    rtol: float = settings.DEFAULT_RTOL
    atol: float = settings.DEFAULT_ATOL
    nu_blowup: float = settings.DEFAULT_NU_BLOWUP
    eta_collision: float = settings.DEFAULT_ETA_COLLISION
    eta_re: float = settings.DEFAULT_ETA_RE
    enforce_separation: bool = False
    h_min: float = settings.DEFAULT_H_MIN
    sample_dt: float = settings.DEFAULT_SAMPLE_DT
    max_steps: int = 1_000_000
    check_admissible: bool = True
    tol_constraint: float = settings.EPS_CONSTRAINT

    def __post_init__(self):
        settings.check_tolerance('rtol', self.rtol)
        settings.check_tolerance('atol', self.atol)
        for name in ('nu_blowup', 'eta_collision', 'eta_re', 'h_min', 'sample_dt', 'tol_constraint'):
            settings.check_positive(name, getattr(self, name))
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")

    def with_tolerance(self, tol: float) -> 'IntegratorOptions':
        """Same options with rtol = tol and atol = tol/100"""
        return replace(self, rtol=tol, atol=max(tol / 100.0, settings.TOLERANCE_RANGE[0]))

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class TrajectoryRecord:
    """Sampled states of one run, the terminating event and step statistics"""

    samples: List[SolitonState]
    options: IntegratorOptions
    event: Optional[EventFlag] = None
    stats: Dict[str, int] = field(default_factory=dict)
    _diagnostics: Optional[List[ConservedSnapshot]] = field(default=None, repr=False)

    @property
    def times(self) -> NDArray:
        return np.array([sample.t for sample in self.samples])

    @property
    def initial(self) -> SolitonState:
        return self.samples[0]

    @property
    def final(self) -> SolitonState:
        return self.samples[-1]

    def diagnostics(self) -> List[ConservedSnapshot]:
        if self._diagnostics is None:
            self._diagnostics = [snapshot(sample) for sample in self.samples]
        return self._diagnostics

    def drift(self) -> Dict[str, float]:
        """Largest deviation of each conserved quantity from its initial value"""
        snaps = self.diagnostics()
        first = snaps[0]
        energy_scale = max(1.0, abs(first.energy_algebraic))
        return {
            'spin_sum': max(float(np.max(np.abs(s.spin_sum - first.spin_sum))) for s in snaps),
            'velocity_sum': max(abs(s.velocity_sum - first.velocity_sum) for s in snaps),
            'im_sum': max(abs(s.im_sum - first.im_sum) for s in snaps),
            'energy_relative': max(abs(s.energy_algebraic - first.energy_algebraic) for s in snaps) / energy_scale,
            'null_residual': max(s.max_null_residual for s in snaps),
            'orthogonality_residual': max(s.max_orthogonality_residual for s in snaps),
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per sample with pole coordinates and monitored quantities"""
        rows = []
        for sample, snap in zip(self.samples, self.diagnostics()):
            row = {'t': sample.t}
            for j, pole in enumerate(sample.poles):
                row[f'x{j}_re'] = pole.real
                row[f'x{j}_im'] = pole.imag
            row.update({
                'min_im': snap.min_im,
                'min_sep': snap.min_sep,
                'max_spin_norm': snap.max_spin_norm,
                'energy': snap.energy_algebraic,
                'im_sum': snap.im_sum,
            })
            rows.append(row)
        return pd.DataFrame(rows)


def _rms(values: NDArray) -> float:
    return float(np.sqrt(np.mean(values * values))) if len(values) else 0.0


class DenseStep:
    """
    Continuous extension of one accepted Dormand-Prince step

    Uses the free fourth-order interpolant of the pair (the P matrix scipy
    ships with RK45), built from the seven stages already evaluated.
    """

    def __init__(self, t_old: float, t_new: float, y_old: NDArray, stages: NDArray):
        self.t_old = t_old
        self.h = t_new - t_old
        self.y_old = y_old
        self.q = stages.T @ RK45.P

    def __call__(self, t: float) -> NDArray:
        x = (t - self.t_old) / self.h
        powers = np.cumprod(np.full(self.q.shape[1], x))
        return self.y_old + self.h * (self.q @ powers)


class SolitonIntegrator:
    """Adaptive integration of the spin-pole system with event detection"""

    def __init__(self, options: Optional[IntegratorOptions] = None):
        self.options = options or IntegratorOptions()

    # ---- event witnesses --------------------------------------------------

    def _witnesses(self, poles: NDArray) -> List[Tuple[EventKind, float, float, int, Optional[int]]]:
        opts = self.options
        value, j = blow_up_witness(poles)
        checks = [(EventKind.BLOW_UP_APPROACH, value, opts.nu_blowup, j, None)]
        if len(poles) > 1:
            value, j, k = collision_witness(poles)
            checks.append((EventKind.POLE_COLLISION, value, opts.eta_collision, j, k))
            if opts.enforce_separation:
                value, j, k = separation_witness(poles)
                checks.append((EventKind.SEPARATION_VIOLATION, value, opts.eta_re, j, k))
        return checks

    def _flag_at(self, poles: NDArray, t: float) -> Optional[EventFlag]:
        for kind, value, threshold, j, k in self._witnesses(poles):
            if value < threshold:
                return EventFlag(kind, j, k, t, value, threshold)
        return None

    def _locate_event(self, dense: DenseStep, n: int, t_old: float, t_new: float) -> Optional[EventFlag]:
        """Earliest threshold crossing inside an accepted step"""
        poles_new = _unpack(dense(t_new), n)[0]
        earliest = None
        for index, (kind, value, threshold, _, _) in enumerate(self._witnesses(poles_new)):
            if value >= threshold:
                continue

            def gap(t, index=index):
                _, value, threshold, _, _ = self._witnesses(_unpack(dense(t), n)[0])[index]
                return value - threshold

            lo, hi = sorted((t_old, t_new))
            if gap(t_old) <= 0:
                hit = t_old
            else:
                hit = bisect(gap, lo, hi, xtol=EVENT_TIME_TOL)
                step = EVENT_TIME_TOL if t_new > t_old else -EVENT_TIME_TOL
                # land on the side where the witness is below threshold
                while gap(hit) > 0 and (t_new - hit) * np.sign(t_new - t_old) > 0:
                    hit = hit + step if abs(t_new - hit) > EVENT_TIME_TOL else t_new
            if earliest is None or abs(hit - t_old) < abs(earliest[0] - t_old):
                earliest = (hit, index)

        if earliest is None:
            return None
        hit, index = earliest
        kind, value, threshold, j, k = self._witnesses(_unpack(dense(hit), n)[0])[index]
        return EventFlag(kind, j, k, float(hit), float(value), float(threshold))

    # ---- public API -------------------------------------------------------

    def integrate(self, state: SolitonState, t_end: float) -> TrajectoryRecord:
        """
        Integrate an admissible state from state.t to t_end

        Stops early with an EventFlag when min Im x_j drops below nu_blowup,
        two poles come within eta_collision, or (with enforce_separation) two
        real parts come within eta_re.

        Raises:
            ConstraintViolation: the state fails validation
            StepSizeUnderflow: the controller asks for a step below h_min
            CoincidentPoles: two poles coincide at the start
        """
        if not t_end > state.t:
            raise InvalidInput(f"t_end={t_end} must exceed the state time {state.t}")
        if self.options.check_admissible:
            report = validate(state, self.options.tol_constraint)
            if not report.admissible:
                raise ConstraintViolation(
                    f"initial state not admissible (max residual {report.max_residual:.3e}, "
                    f"min Im {report.min_im:.3e})", report=report.to_dict())
        record = self._run(state, float(t_end))
        drift = record.drift()
        logger.info("integrated N=%d to t=%.6g: %s, energy drift %.2e, null drift %.2e",
                    state.n, record.final.t, record.event.kind.value if record.event else "no event",
                    drift['energy_relative'], drift['null_residual'])
        if drift['null_residual'] > 10.0 * max(self.options.rtol, self.options.tol_constraint):
            logger.warning("nullity drift %.3e exceeds ten times the tolerance", drift['null_residual'])
        return record

    def _sample_times(self, t0: float, t_end: float) -> NDArray:
        direction = 1.0 if t_end > t0 else -1.0
        count = int(np.floor(abs(t_end - t0) / self.options.sample_dt + 1e-9))
        times = t0 + direction * self.options.sample_dt * np.arange(count + 1)
        if abs(times[-1] - t_end) > 1e-12 * max(1.0, abs(t_end)):
            times = np.append(times, t_end)
        else:
            times[-1] = t_end
        return times

    def _run(self, state: SolitonState, t_end: float) -> TrajectoryRecord:
        if state.n <= 1:
            return self._closed_form(state, t_end)
        return self._dopri(state, t_end)

    def _closed_form(self, state: SolitonState, t_end: float) -> TrajectoryRecord:
        """Free motion: with at most one pole every interaction sum is empty"""
        t0 = state.t
        times = self._sample_times(t0, t_end)
        event = self._flag_at(state.poles, t0)
        if event is None and state.n == 1:
            height, rate = state.poles[0].imag, state.velocities[0].imag
            direction = np.sign(t_end - t0)
            if rate * direction < 0:
                hit = t0 + (height - self.options.nu_blowup) / (-rate * direction) * direction
                if (t_end - hit) * direction >= 0:
                    # first instant strictly below threshold
                    hit = hit + direction * EVENT_TIME_TOL
                    if (t_end - hit) * direction < 0:
                        hit = t_end
                    pole = state.poles[0] + state.velocities[0] * (hit - t0)
                    event = EventFlag(EventKind.BLOW_UP_APPROACH, 0, None, float(hit),
                                      float(pole.imag), self.options.nu_blowup)
        if event is not None:
            times = np.append(times[(times - event.time) * np.sign(t_end - t0) < 0], event.time)

        samples = []
        for t in times:
            samples.append(SolitonState(state.m0, state.poles + state.velocities * (t - t0),
                                        state.velocities, state.spins, t))
        samples[0] = SolitonState(state.m0, state.poles, state.velocities, state.spins, t0)
        return TrajectoryRecord(samples, self.options, event, {'accepted': 0, 'rejected': 0})

    def _initial_step(self, y: NDArray, f0: NDArray, n: int, span: float) -> float:
        opts = self.options
        scale = opts.atol + opts.rtol * np.abs(y)
        d0 = _rms(y / scale)
        d1 = _rms(f0 / scale)
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h0 = min(h0, span)
        f1 = _phase_rhs(y + h0 * f0, n)
        d2 = _rms((f1 - f0) / scale) / h0
        top = max(d1, d2)
        h1 = (0.01 / top) ** 0.2 if top > 1e-15 else max(1e-6, h0 * 1e-3)
        return min(100.0 * h0, h1, span)

    def _dopri(self, state: SolitonState, t_end: float) -> TrajectoryRecord:
        opts = self.options
        n = state.n
        m0 = state.m0
        t = state.t
        direction = 1.0 if t_end > t else -1.0
        y = to_phase(state)
        f = rhs(state)

        sample_times = self._sample_times(t, t_end)
        samples = [SolitonState(m0, state.poles, state.velocities, state.spins, t)]
        next_sample = 1
        stats = {'accepted': 0, 'rejected': 0}

        event = self._flag_at(state.poles, t)
        if event is not None:
            return TrajectoryRecord(samples, opts, event, stats)

        h = self._initial_step(y, f, n, abs(t_end - t))
        if h < opts.h_min:
            raise StepSizeUnderflow(t, h, state)
        err_old = 1e-4
        rejected_last = False
        stages = np.empty((7, len(y)))

        while (t_end - t) * direction > 0:
            if stats['accepted'] + stats['rejected'] >= opts.max_steps:
                raise IntegrationError(f"step budget of {opts.max_steps} exhausted at t={t:.12g}",
                                       t=t, max_steps=opts.max_steps)
            # steps end on sample times so every sample is a step endpoint
            target = sample_times[next_sample]
            remaining = abs(target - t)
            step = min(h, remaining)
            clipped = step == remaining
            signed = direction * step

            stages[0] = f
            for i in range(1, 7):
                increment = np.dot(_A[i], stages[:i])
                stages[i] = _phase_rhs(y + signed * increment, n)
            y_new = y + signed * np.dot(_B5, stages)
            f_new = stages[6]
            error_vec = signed * np.dot(_E, stages)

            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
                stats['rejected'] += 1
                rejected_last = True
                h = step * _SHRINK_MIN
                logger.debug("non-finite stage at t=%.12g, shrinking step to %.3e", t, h)
                if h < opts.h_min:
                    raise StepSizeUnderflow(t, h, from_phase(y, m0, t))
                continue

            scale = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = _rms(error_vec / scale)

            if err > 1.0:
                stats['rejected'] += 1
                rejected_last = True
                h = step * max(_SHRINK_MIN, _SAFETY * err ** -0.2)
                if h < opts.h_min:
                    raise StepSizeUnderflow(t, h, from_phase(y, m0, t))
                continue

            t_new = target if clipped else t + signed
            dense = DenseStep(t, t_new, y, stages)
            event = self._locate_event(dense, n, t, t_new)

            if event is None and t_new == target:
                samples.append(from_phase(y_new, m0, target))
                next_sample += 1
            if event is not None:
                if event.time == t_new == target:
                    samples.append(from_phase(y_new, m0, target))
                else:
                    samples.append(from_phase(dense(event.time), m0, event.time))
                logger.info("event %s at t=%.12g (witness %.3e)", event.kind.value, event.time, event.witness)
                stats['accepted'] += 1
                return TrajectoryRecord(samples, opts, event, stats)

            stats['accepted'] += 1
            factor = _SAFETY * max(err, 1e-10) ** -_ALPHA * err_old ** _BETA
            factor = min(_GROW_MAX, max(_SHRINK_MIN, factor))
            if rejected_last:
                factor = min(factor, 1.0)
            err_old = max(err, 1e-4)
            rejected_last = False
            t, y, f = t_new, y_new, f_new
            if not clipped:
                h = step * factor
            elif factor >= 1.0:
                # a step shortened to land on a sample does not cap the next one
                h = max(h, step * factor)
            else:
                h = h * factor
            if h < opts.h_min and (t_end - t) * direction > 0:
                raise StepSizeUnderflow(t, h, from_phase(y, m0, t))

        return TrajectoryRecord(samples, opts, None, stats)


def integrate(state: SolitonState, t_end: float, opts: Optional[IntegratorOptions] = None) -> TrajectoryRecord:
    """Functional front end of SolitonIntegrator.integrate"""
    return SolitonIntegrator(opts).integrate(state, t_end)


def reverse_check(record: TrajectoryRecord) -> float:
    """
    Integrate back from the final sample to the initial time and return the
    phase-space distance to the initial state

    Raises:
        IntegrationError: the backward run stopped on an event before t0
    """
    if record.event is not None:
        raise InvalidInput("reverse check needs a record without events")
    if len(record.samples) < 2:
        raise InvalidInput("reverse check needs at least two samples")
    options = replace(record.options, check_admissible=False)
    back = SolitonIntegrator(options)._run(record.final, record.initial.t)
    if back.event is not None:
        raise IntegrationError(f"backward run stopped by {back.event.kind.value} at t={back.event.time:.12g}",
                               event=back.event.to_dict())
    distance = float(np.linalg.norm(to_phase(back.final) - to_phase(record.initial)))
    logger.info("reverse check distance %.3e over [%.6g, %.6g]", distance, record.initial.t, record.final.t)
    return distance
