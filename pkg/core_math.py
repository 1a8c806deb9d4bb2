"""
Deterministic randomness, spherical geometry primitives and the dense
symmetric eigensolver shared by every other module.

Random draws come from numpy's counter-based ``Philox`` bit generator keyed by
``SeedSequence(seed, spawn_key=(stream, ...))``. Gaussian variates use numpy's
ziggurat ``standard_normal``; together these fix the byte stream of a
reproducible run.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from config import EIGEN_CONFIG
from errors import (
    ConvergenceWarning,
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    NumericInputError,
)
from logger import get_logger

logger = get_logger(__name__)

UINT64_MAX = 2 ** 64 - 1
UNIT_NORM_TOL = 1e-12


class Rng:
    """Seeded random stream owned by exactly one logical task.

    Identical ``(seed, stream)`` pairs replay identical draws; distinct streams
    (and children of a stream) are independent ``SeedSequence`` branches.
    """

    def __init__(self, seed, stream=0, lineage=()):
        seed, stream = int(seed), int(stream)
        if not 0 <= seed <= UINT64_MAX:
            raise InvalidParameterError(f"seed must lie in [0, 2^64), got {seed}")
        if not 0 <= stream <= UINT64_MAX:
            raise InvalidParameterError(f"stream must lie in [0, 2^64), got {stream}")
        self.seed = seed
        self.stream = stream
        self.lineage = tuple(int(i) for i in lineage)
        sequence = np.random.SeedSequence(seed, spawn_key=(stream,) + self.lineage)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, index):
        """Independent substream for the index-th subtask (trial, wedge batch)"""
        return Rng(self.seed, self.stream, self.lineage + (index,))

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream}, lineage={self.lineage})"


def _as_vector(values, name='vector'):
    vector = np.asarray(values, dtype=float)
    if vector.ndim != 1:
        raise InvalidDimensionError(f"{name} must be one-dimensional, got shape {vector.shape}")
    return vector


@dataclass(frozen=True, eq=False)
class UnitVector:
    """Real vector of Euclidean norm one (within 1e-12)"""
    coords: np.ndarray

    def __post_init__(self):
        coords = _as_vector(self.coords, 'coords')
        if coords.size == 0:
            raise InvalidDimensionError("unit vector needs at least one coordinate")
        norm = np.linalg.norm(coords)
        if not np.isfinite(norm) or norm == 0.0:
            raise InvalidParameterError("cannot normalize a zero or non-finite vector")
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            coords = coords / norm
        coords = coords.copy()
        coords.flags.writeable = False
        object.__setattr__(self, 'coords', coords)

    @classmethod
    def normalized(cls, values):
        """Renormalize an arbitrary nonzero vector"""
        values = _as_vector(values)
        return cls(values / np.linalg.norm(values))

    @property
    def n(self):
        return self.coords.size

    def __neg__(self):
        return UnitVector(-self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


class SymMatrix:
    """Symmetric matrix stored through its upper triangle.

    The full array is rebuilt from that triangle, so ``entries[i, j] ==
    entries[j, i]`` holds exactly whatever the input's lower triangle held.
    """

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidDimensionError(f"symmetric matrix must be square, got shape {entries.shape}")
        self._upper = np.triu(entries)
        full = self._upper + np.triu(entries, 1).T
        full.flags.writeable = False
        self._entries = full

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, n)))

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def entries(self):
        return self._entries

    @property
    def n(self):
        return self._entries.shape[0]

    def frobenius(self):
        return float(np.linalg.norm(self._entries))

    def __add__(self, other):
        return SymMatrix(self._entries + other.entries)

    def __sub__(self, other):
        return SymMatrix(self._entries - other.entries)

    def __mul__(self, scalar):
        return SymMatrix(float(scalar) * self._entries)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymMatrix(n={self.n})"


def signum(values):
    """Sign with the convention sign(0) := +1"""
    if np.ndim(values) == 0:
        return 1.0 if values >= 0 else -1.0
    return np.where(np.asarray(values) >= 0, 1.0, -1.0)


def sample_uniform_sphere(n, rng):
    """Uniform draw from the unit sphere S^{n-1} (normalized Gaussian)"""
    if n < 1:
        raise InvalidDimensionError(f"dimension must be at least 1, got {n}")
    while True:
        draw = rng.standard_normal(n)
        norm = np.linalg.norm(draw)
        if norm > 0.0:
            return UnitVector(draw / norm)


def sample_uniform_sphere_batch(n, count, rng):
    """(count, n) array whose rows are independent uniform sphere draws"""
    if n < 1:
        raise InvalidDimensionError(f"dimension must be at least 1, got {n}")
    draws = rng.standard_normal((count, n))
    norms = np.linalg.norm(draws, axis=1)
    # a zero Gaussian vector has probability zero; keep the row finite anyway
    norms[norms == 0.0] = 1.0
    return draws / norms[:, None]


def angle_between(u, v):
    """Angle in [0, pi] between two unit vectors"""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"cannot compare vectors of shapes {u.shape} and {v.shape}")
    return math.acos(min(1.0, max(-1.0, float(u @ v))))


def angle_to(z, x):
    """Angle between two arbitrary nonzero vectors (pi/2 if either is zero)"""
    z, x = _as_vector(z), _as_vector(x)
    denom = np.linalg.norm(z) * np.linalg.norm(x)
    if denom == 0.0:
        return math.pi / 2
    return math.acos(min(1.0, max(-1.0, float(z @ x) / denom)))


def dist_to_sign_set(z, x):
    """Distance from z to the solution set {x, -x}"""
    z, x = _as_vector(z, 'z'), _as_vector(x, 'x')
    if z.shape != x.shape:
        raise DimensionMismatchError(f"length mismatch: {z.size} vs {x.size}")
    return float(min(np.linalg.norm(z - x), np.linalg.norm(z + x)))


def random_orthogonal(n, rng):
    """Haar-distributed orthogonal matrix from the QR of a Gaussian matrix"""
    if n < 1:
        raise InvalidDimensionError(f"dimension must be at least 1, got {n}")
    q, r = scipy.linalg.qr(rng.standard_normal((n, n)))
    return q * signum(np.diag(r))[None, :]


def _jacobi_eig(a, tol, max_sweeps):
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = signum(theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off > tol * scale:
            warnings.warn(f"Jacobi stopped after {max_sweeps} sweeps (off-diagonal {off:.3e})",
                          ConvergenceWarning)
    return np.diag(a).copy(), v


def sym_eig(matrix, tol=None, max_sweeps=None):
    """Eigen-decomposition of a symmetric matrix.

    Returns ascending eigenvalues and a matrix whose columns are the matching
    orthonormal eigenvectors. Cyclic Jacobi rotations handle matrices up to
    ``EIGEN_CONFIG['jacobi_max_n']``; larger ones go to LAPACK.
    """
    if not isinstance(matrix, SymMatrix):
        matrix = SymMatrix(matrix)
    entries = matrix.entries
    if not np.all(np.isfinite(entries)):
        raise NumericInputError("symmetric eigensolver received non-finite entries")
    tol = EIGEN_CONFIG['tol'] if tol is None else tol
    max_sweeps = EIGEN_CONFIG['max_sweeps'] if max_sweeps is None else max_sweeps

    if matrix.n > EIGEN_CONFIG['jacobi_max_n']:
        logger.debug("Delegating eigen-decomposition to LAPACK", n=matrix.n)
        eigenvalues, eigenvectors = scipy.linalg.eigh(entries)
    else:
        eigenvalues, eigenvectors = _jacobi_eig(entries, tol, max_sweeps)
    order = np.argsort(eigenvalues, kind='stable')
    return eigenvalues[order], eigenvectors[:, order]
