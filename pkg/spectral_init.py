"""
Truncated spectral initialization.

x0 is the leading eigenvector of Y = (1/m) sum b_i^2 a_i a_i^T 1(b_i <= 3 lambda0),
scaled to the norm estimate sqrt(n) * lambda0 (unit rows give E b^2 = ||x||^2 / n).
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np

from config import SPECTRAL_CONFIG
from core_math import Rng, SymMatrix, sample_uniform_sphere, sym_eig
from errors import AmbiguousEigenvectorWarning, ConvergenceWarning, DegenerateInstanceError, InvalidParameterError
from logger import get_logger

logger = get_logger(__name__)


@dataclass
class InitResult:
    x0: np.ndarray
    lambda0: float
    truncated_count: int
    iterations_used: int

    @property
    def norm_estimate(self):
        return float(np.linalg.norm(self.x0))

    def to_dict(self):
        return {
            'x0': [float(v) for v in self.x0],
            'lambda0': self.lambda0,
            'truncated_count': self.truncated_count,
        }


def norm_scale(ms):
    """Return (lambda0_raw, norm_estimate) with lambda0_raw = sqrt(mean b^2)"""
    lambda0 = math.sqrt(float(np.mean(ms.magnitudes ** 2)))
    if lambda0 == 0.0:
        raise DegenerateInstanceError("all magnitudes are zero; the signal scale is undetermined")
    return lambda0, math.sqrt(ms.n) * lambda0


def truncation_mask(ms, lambda0=None):
    if lambda0 is None:
        lambda0 = math.sqrt(float(np.mean(ms.magnitudes ** 2)))
    return ms.magnitudes <= SPECTRAL_CONFIG['truncation'] * lambda0


def build_truncated_matrix(ms):
    """(1/m) sum over kept rows of b_i^2 a_i a_i^T; a zero matrix when every b_i is 0"""
    keep = truncation_mask(ms)
    rows = ms.matrix[keep]
    weights = ms.magnitudes[keep] ** 2
    y = (rows.T * weights) @ rows / ms.m
    return SymMatrix(y)


def power_iteration(Y, start, tol=None, max_iter=None):
    """Leading eigenvector of a PSD matrix; returns (unit vector, iterations)"""
    tol = SPECTRAL_CONFIG['power_tol'] if tol is None else tol
    max_iter = SPECTRAL_CONFIG['power_max_iter'] if max_iter is None else max_iter
    entries = Y.entries if isinstance(Y, SymMatrix) else np.asarray(Y, dtype=float)
    v = np.asarray(start, dtype=float)
    v = v / np.linalg.norm(v)
    for iteration in range(1, max_iter + 1):
        w = entries @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return v, iteration
        w = w / norm
        if np.linalg.norm(w - v) < tol:
            return w, iteration
        v = w
    warnings.warn(f"power iteration stopped after {max_iter} steps", ConvergenceWarning)
    return v, max_iter


def initialize(ms, start_seed=None):
    """Truncated spectral estimate of x (up to global sign)"""
    lambda0, norm_estimate = norm_scale(ms)
    keep = truncation_mask(ms, lambda0)
    y = build_truncated_matrix(ms)

    seed = SPECTRAL_CONFIG['start_seed'] if start_seed is None else start_seed
    start = sample_uniform_sphere(ms.n, Rng(seed)).coords
    v, iterations = power_iteration(y, start)

    if ms.n > 1:
        eigenvalues, eigenvectors = sym_eig(y)
        gap = eigenvalues[-1] - eigenvalues[-2]
        if gap < SPECTRAL_CONFIG['gap_tol']:
            warnings.warn(f"top eigenvalues of the truncated matrix coincide (gap {gap:.3g})",
                          AmbiguousEigenvectorWarning)
            v = eigenvectors[:, -1]

    result = InitResult(norm_estimate * v, lambda0, int(np.count_nonzero(keep)), iterations)
    logger.debug("Spectral initialization done", n=ms.n, m=ms.m, lambda0=lambda0,
                 truncated_count=result.truncated_count, iterations=iterations)
    return result


def random_init(n, scale, rng):
    """Random direction of length `scale`; no recovery guarantee"""
    if scale <= 0:
        raise InvalidParameterError(f"scale must be positive, got {scale}")
    return scale * sample_uniform_sphere(n, rng).coords
