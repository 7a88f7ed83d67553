"""
Shared fixtures for the test suite
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the repository root to path so the src package resolves
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.configuration import SolitonState, VelocityMode, single_soliton, two_soliton_preset

DATA_DIR = Path(__file__).parent.parent / 'data'


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical oracle")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def canonical_state():
    """N=1, m0 = e3, s = (1, i, 0), x = i; not admissible"""
    return SolitonState([0.0, 0.0, 1.0], [1j], [0j], [[1.0, 1j, 0.0]])


@pytest.fixture
def admissible_single():
    """Same spin and pole with m0 = e1, which satisfies every constraint"""
    return SolitonState([1.0, 0.0, 0.0], [1j], [0j], [[1.0, 1j, 0.0]])


@pytest.fixture
def empty_state():
    return SolitonState([0.0, 0.0, 1.0], [], [], np.zeros((0, 3)))


@pytest.fixture(scope='session')
def receding_pair():
    """Admissible two-pole state moving apart with closure velocities ∓0.5"""
    return two_soliton_preset(-0.5, 0.5, [1.0, 1.0], seed=7, velocity_mode=VelocityMode.CLOSURE)


@pytest.fixture(scope='session')
def moving_soliton():
    return single_soliton(m0=(0.0, 0.0, 1.0), height=1.5, velocity=0.3, position=-2.0, seed=4)
