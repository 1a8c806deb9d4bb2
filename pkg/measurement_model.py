"""
Phase-retrieval problem instances: generation, validation and serialization.

An instance is a set of unit-norm sampling vectors a_i (the rows of A) with
observed magnitudes b_i = |<a_i, x>|, optionally carrying the hidden signal x
for benchmarking.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from artifact_store import ArtifactStore, dumps_json
from core_math import UNIT_NORM_TOL, UnitVector, sample_uniform_sphere_batch
from errors import (
    ArtifactIOError,
    DegenerateRowError,
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    InvalidSignalError,
)
from logger import get_logger
from validators import Validator

logger = get_logger(__name__)

SCHEMA_VERSION = 1
MAGNITUDE_TOL = 1e-12


def _frozen(array):
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Signal:
    """Ground-truth vector x with its cached Euclidean norm"""
    x: np.ndarray
    norm: float = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise InvalidDimensionError(f"signal must be a non-empty vector, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidSignalError("signal has non-finite entries")
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            raise InvalidSignalError("signal must not be the zero vector")
        object.__setattr__(self, 'x', _frozen(x))
        object.__setattr__(self, 'norm', norm)

    @property
    def n(self):
        return self.x.size

    def scaled(self, c):
        return Signal(c * self.x)


@dataclass(frozen=True)
class MeasurementMeta:
    n: int
    m: int
    generator: str
    seed: Optional[int]


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Unit rows a_i (as an m x n matrix) with magnitudes b_i >= 0.

    Immutable after construction; safe to share read-only between tasks.
    """
    matrix: np.ndarray
    magnitudes: np.ndarray
    meta: MeasurementMeta
    signal: Optional[Signal] = None

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        magnitudes = np.asarray(self.magnitudes, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
            raise InvalidDimensionError(f"measurement matrix must be m x n with m, n >= 1, got {matrix.shape}")
        m, n = matrix.shape
        if magnitudes.shape != (m,):
            raise DimensionMismatchError(f"expected {m} magnitudes, got shape {magnitudes.shape}")
        if (self.meta.n, self.meta.m) != (n, m):
            raise DimensionMismatchError(f"meta says n={self.meta.n}, m={self.meta.m}; matrix is {m} x {n}")
        if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(magnitudes))):
            raise InvalidParameterError("instance has non-finite entries")

        row_norms = np.linalg.norm(matrix, axis=1)
        bad = np.flatnonzero(np.abs(row_norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            raise DegenerateRowError(f"row {bad[0]} has norm {row_norms[bad[0]]!r}, expected 1")
        if np.any(magnitudes < 0):
            raise InvalidParameterError("magnitudes must be nonnegative")

        if self.signal is not None:
            if self.signal.n != n:
                raise DimensionMismatchError(f"signal has length {self.signal.n}, rows have length {n}")
            expected = np.abs(matrix @ self.signal.x)
            tol = MAGNITUDE_TOL * max(1.0, self.signal.norm)
            if np.any(np.abs(expected - magnitudes) > tol):
                raise InvalidParameterError("magnitudes are inconsistent with the attached signal")

        object.__setattr__(self, 'matrix', _frozen(matrix))
        object.__setattr__(self, 'magnitudes', _frozen(magnitudes))

    @property
    def n(self):
        return self.matrix.shape[1]

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def rows(self):
        return [UnitVector(row) for row in self.matrix]

    def scaled(self, c):
        """Same rows, magnitudes and signal multiplied by c > 0"""
        if c <= 0:
            raise InvalidParameterError(f"scale factor must be positive, got {c}")
        signal = self.signal.scaled(c) if self.signal is not None else None
        return MeasurementSet(self.matrix, c * self.magnitudes, self.meta, signal)

    def rotated(self, q):
        """Rows a_i -> Q a_i and x -> Q x for an orthogonal Q"""
        q = np.asarray(q, dtype=float)
        matrix = self.matrix @ q.T
        matrix = matrix / np.linalg.norm(matrix, axis=1)[:, None]
        if self.signal is not None:
            signal = Signal(q @ self.signal.x)
            magnitudes = np.abs(matrix @ signal.x)
        else:
            signal, magnitudes = None, self.magnitudes
        return MeasurementSet(matrix, magnitudes, self.meta, signal)


def _build(matrix, signal, generator, seed):
    m, n = matrix.shape
    magnitudes = np.abs(matrix @ signal.x)
    return MeasurementSet(matrix, magnitudes, MeasurementMeta(n, m, generator, seed), signal)


def _check_generation_args(n, m, signal):
    if n < 1 or m < 1:
        raise InvalidDimensionError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if not isinstance(signal, Signal):
        signal = Signal(signal)
    if signal.n != n:
        raise DimensionMismatchError(f"signal has length {signal.n}, expected {n}")
    return signal


def generate_uniform_instance(n, m, signal, rng):
    """Rows i.i.d. uniform on the sphere, magnitudes |<a_i, x>|"""
    signal = _check_generation_args(n, m, signal)
    matrix = sample_uniform_sphere_batch(n, m, rng)
    logger.debug("Generated uniform instance", n=n, m=m, seed=rng.seed)
    return _build(matrix, signal, 'uniform', rng.seed)


def generate_gaussian_rows(n, m, signal, rng):
    """Rows drawn standard Gaussian, then normalized; b recomputed after normalization"""
    signal = _check_generation_args(n, m, signal)
    raw = rng.standard_normal((m, n))
    logger.debug("Generated gaussian instance", n=n, m=m, seed=rng.seed)
    return measurements_from_rows(raw, signal=signal, generator='gaussian', seed=rng.seed)


def measurements_from_rows(raw_rows, signal=None, magnitudes=None, generator='custom', seed=None):
    """Normalize arbitrary nonzero rows into an instance.

    Magnitudes come from the signal when one is given, otherwise they must be
    supplied (real, signal-unknown data).
    """
    raw = np.atleast_2d(np.asarray(raw_rows, dtype=float))
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateRowError(f"row {int(np.flatnonzero(norms == 0.0)[0])} is zero")
    matrix = raw / norms[:, None]
    m, n = matrix.shape
    if signal is not None:
        if not isinstance(signal, Signal):
            signal = Signal(signal)
        return _build(matrix, signal, generator, seed)
    if magnitudes is None:
        raise InvalidParameterError("either a signal or the magnitudes must be given")
    return MeasurementSet(matrix, magnitudes, MeasurementMeta(n, m, generator, seed))


def residual_vector(ms, z):
    """Per-row |<a_i, z>| - b_i"""
    z = np.asarray(z, dtype=float)
    if z.shape != (ms.n,):
        raise DimensionMismatchError(f"iterate has shape {z.shape}, expected ({ms.n},)")
    return np.abs(ms.matrix @ z) - ms.magnitudes


def amplitude_flow_loss(ms, z):
    """(1/2m) sum of squared residuals; the Kaczmarz step is SGD on this objective"""
    residuals = residual_vector(ms, z)
    return float(residuals @ residuals) / (2 * ms.m)


def to_instance_dict(ms, include_signal=True):
    document = {
        'schema_version': SCHEMA_VERSION,
        'n': ms.n,
        'm': ms.m,
        'generator': ms.meta.generator,
        'seed': ms.meta.seed,
        'rows': [list(map(float, row)) for row in ms.matrix],
        'magnitudes': list(map(float, ms.magnitudes)),
    }
    if include_signal and ms.signal is not None:
        document['signal'] = list(map(float, ms.signal.x))
    return document


def from_instance_dict(document):
    """Build a MeasurementSet from a parsed InstanceFile document"""
    data, errors = Validator().validate_instance(document)
    if errors:
        raise InvalidParameterError(f"invalid instance file: {errors}")
    matrix = np.asarray(data['rows'], dtype=float)
    if matrix.shape != (data['m'], data['n']):
        raise DimensionMismatchError(
            f"rows have shape {matrix.shape}, header says m={data['m']}, n={data['n']}")
    signal = Signal(data['signal']) if data.get('signal') is not None else None
    meta = MeasurementMeta(data['n'], data['m'], data['generator'], data.get('seed'))
    return MeasurementSet(matrix, np.asarray(data['magnitudes'], dtype=float), meta, signal)


def save_instance(ms, path, store=None, include_signal=True):
    """Write an InstanceFile (UTF-8 JSON, 17-significant-digit floats)"""
    store = store or ArtifactStore('.', build_tag=None)
    return store.write_text(path, dumps_json(to_instance_dict(ms, include_signal)))


def load_instance(path):
    document = ArtifactStore.read_json(path)
    if not isinstance(document, dict):
        raise ArtifactIOError(f"{path} does not hold an instance object")
    return from_instance_dict(document)
