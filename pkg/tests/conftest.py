"""
Shared fixtures; forces the testing configuration before any module import.
"""
import os

os.environ['PRK_ENV'] = 'testing'
os.environ['PRK_LOG_FILE'] = ''
os.environ['PRK_BUILD_TAG'] = 'prk-test'
os.environ['PRK_THREADS'] = '1'

import numpy as np
import pytest

from core_math import Rng, sample_uniform_sphere
from measurement_model import Signal, generate_uniform_instance, measurements_from_rows


@pytest.fixture
def rng():
    return Rng(12345)


@pytest.fixture
def signal():
    return Signal(np.array([0.6, -0.8, 0.0, 0.0, 0.0]))


@pytest.fixture
def instance(signal):
    """n=5, m=100 uniform instance carrying its signal"""
    return generate_uniform_instance(5, 100, signal, Rng(7))


@pytest.fixture
def make_instance():
    def _make(n, m, seed=0, norm=1.0):
        rng = Rng(seed)
        x = Signal(norm * sample_uniform_sphere(n, rng.child(0)).coords)
        return generate_uniform_instance(n, m, x, rng.child(1))
    return _make


@pytest.fixture
def duplicate_row_instance():
    """Every row equal to e1; no wedge family can be anti-concentrated"""
    rows = np.tile(np.eye(3)[0], (50, 1))
    return measurements_from_rows(rows, signal=np.array([1.0, 0.5, -0.2]), generator='duplicate')
