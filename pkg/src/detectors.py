"""
Detectors Module
Witness functions for pole blow-up, collision and separation, event flags,
and the classification of finished trajectories into situations
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from src.asymptotics import TrajectoryFitter

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    BLOW_UP_APPROACH = "BlowUpApproach"
    POLE_COLLISION = "PoleCollision"
    SEPARATION_VIOLATION = "SeparationViolation"


class Situation(str, Enum):
    """Finite-horizon outcome of a trajectory"""

    FINITE_TIME_BLOWUP = "finite_time_blowup"
    DECAYING_UP_TO_T = "decaying_up_to_T"
    NON_TURBULENT_UP_TO_T = "non_turbulent_up_to_T"


# Severity order used when summarising flags
SEVERITY = {
    EventKind.BLOW_UP_APPROACH: 0,
    EventKind.POLE_COLLISION: 1,
    EventKind.SEPARATION_VIOLATION: 2,
}


@dataclass(frozen=True)
class EventFlag:
    """A threshold crossing located on the dense output"""

    kind: EventKind
    j: int
    k: Optional[int]
    time: float
    witness: float
    threshold: float

    def to_dict(self) -> Dict:
        return {
            'kind': self.kind.value,
            'j': self.j,
            'k': self.k,
            'time': self.time,
            'witness': self.witness,
            'threshold': self.threshold,
        }

    @classmethod
    def from_dict(cls, doc: Dict) -> 'EventFlag':
        return cls(EventKind(doc['kind']), int(doc['j']),
                   None if doc.get('k') is None else int(doc['k']),
                   float(doc['time']), float(doc['witness']), float(doc['threshold']))


def blow_up_witness(poles: ArrayLike) -> Tuple[float, int]:
    """min_j Im x_j and its index; +inf for no poles"""
    poles = np.asarray(poles, dtype=complex)
    if len(poles) == 0:
        return float('inf'), -1
    j = int(np.argmin(poles.imag))
    return float(poles.imag[j]), j


def _pair_minimum(distances: np.ndarray) -> Tuple[float, int, int]:
    n = len(distances)
    if n < 2:
        return float('inf'), -1, -1
    masked = distances + np.diag(np.full(n, np.inf))
    flat = int(np.argmin(masked))
    j, k = divmod(flat, n)
    return float(masked[j, k]), min(j, k), max(j, k)


def collision_witness(poles: ArrayLike) -> Tuple[float, int, int]:
    """min_{j≠k} |x_j − x_k| with the closest pair"""
    poles = np.asarray(poles, dtype=complex)
    return _pair_minimum(np.abs(poles[:, None] - poles[None, :]))


def separation_witness(poles: ArrayLike) -> Tuple[float, int, int]:
    """min_{j≠k} |Re x_j − Re x_k| with the closest pair"""
    re = np.asarray(poles, dtype=complex).real
    return _pair_minimum(np.abs(re[:, None] - re[None, :]))


class SituationClassifier:
    """Classify finished trajectories and summarise their event flags"""

    # OLS log-slope of min Im below which the run counts as decaying
    DECAY_SLOPE = -1e-3

    def __init__(self, nu: float):
        self.nu = nu
        self.fitter = TrajectoryFitter()

    def classify(self, record) -> Dict:
        """
        Finite-horizon situation of a TrajectoryRecord

        A blow-up or collision event is a finite-time singularity. Otherwise
        the run is non-turbulent up to its horizon unless min Im x shows a
        significant negative log-trend, which can only be flagged, never
        certified, as decay at infinite time.
        """
        times = np.array([sample.t for sample in record.samples])
        min_im = np.array([blow_up_witness(sample.poles)[0] for sample in record.samples])
        horizon = float(times[-1]) if len(times) else 0.0

        if record.event is not None and record.event.kind != EventKind.SEPARATION_VIOLATION:
            situation = Situation.FINITE_TIME_BLOWUP
            trend = None
        else:
            trend = None
            finite = np.isfinite(min_im)
            if finite.sum() >= 3:
                trend = self.fitter.trend_slope(times[finite], min_im[finite], log=True)
            decaying = (trend is not None
                        and trend['slope'] < self.DECAY_SLOPE
                        and abs(trend['slope']) > 3.0 * trend['stderr'])
            situation = Situation.DECAYING_UP_TO_T if decaying else Situation.NON_TURBULENT_UP_TO_T

        result = {
            'situation': situation.value,
            'horizon': horizon,
            'min_im': float(np.min(min_im)) if len(min_im) else float('inf'),
            'min_im_trend': trend,
        }
        logger.info("trajectory classified as %s up to t=%.6g", situation.value, horizon)
        return result

    @staticmethod
    def summarize(flags: List[EventFlag]) -> Dict:
        """Counts per event kind, most severe first"""
        ordered = sorted(flags, key=lambda flag: (SEVERITY[flag.kind], flag.time))
        summary = {kind.value: 0 for kind in EventKind}
        for flag in ordered:
            summary[flag.kind.value] += 1
        return {
            'total': len(ordered),
            'by_kind': summary,
            'first': ordered[0].to_dict() if ordered else None,
        }
