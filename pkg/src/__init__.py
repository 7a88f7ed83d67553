"""
Half-Wave Maps Soliton Lab
Source package initialization
"""

__version__ = "1.0.0"
__author__ = "Half-Wave Maps Soliton Lab Team"

from .configuration import ConstraintReport, ConstraintSolver, SolitonState, VelocityMode
from .data_loader import DataLoader
from .dynamics import IntegratorOptions, SolitonIntegrator, TrajectoryRecord
from .experiments import ExperimentSpec, TheoremReport
from .field import QuadratureSpec

__all__ = [
    'ConstraintReport',
    'ConstraintSolver',
    'DataLoader',
    'ExperimentSpec',
    'IntegratorOptions',
    'QuadratureSpec',
    'SolitonIntegrator',
    'SolitonState',
    'TheoremReport',
    'TrajectoryRecord',
    'VelocityMode',
]
