"""
Randomized Kaczmarz solvers.

Covers the classical row-projection method for consistent linear systems,
the phase-retrieval step that projects onto the closer of the two hyperplanes
<a, z> = +b and <a, z> = -b, the instrumented run loop (distance, angle,
residual and basin-escape tracking), and the ensemble majority-ball algorithm.
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import SOLVER_CONFIG
from core_math import Rng, angle_to, dist_to_sign_set, sample_uniform_sphere, signum
from errors import (
    DegenerateRowError,
    DimensionMismatchError,
    EmptyMeasureError,
    InvalidParameterError,
    NoMajorityError,
    OutOfBasinError,
)
from logger import get_logger
from measurement_model import MeasurementSet, Signal, residual_vector

logger = get_logger(__name__)

BASIN_ANGLE = SOLVER_CONFIG['basin_angle']
# alpha_sigma = 1/2 - 4 sin(pi/8) / pi
ALPHA_SIGMA = 0.5 - 4.0 * math.sin(math.pi / 8) / math.pi
SELECTOR_MODES = ('uniform', 'squared-norm')
TRACE_COLUMNS = ['step', 'dist', 'angle', 'residual']


def linear_kaczmarz_step(xk, a, b):
    """Project xk onto the hyperplane <a, r> = b"""
    xk, a = np.asarray(xk, dtype=float), np.asarray(a, dtype=float)
    if xk.shape != a.shape:
        raise DimensionMismatchError(f"iterate {xk.shape} and row {a.shape} differ")
    norm_sq = float(a @ a)
    if norm_sq == 0.0:
        raise DegenerateRowError("cannot project onto the hyperplane of a zero row")
    return xk + (b - float(a @ xk)) / norm_sq * a


def pr_kaczmarz_step(z, a, b):
    """Closer-hyperplane step z + eta a with eta = sign(<a, z>) b - <a, z>.

    `a` must have unit norm; sign(0) is taken as +1.
    """
    z, a = np.asarray(z, dtype=float), np.asarray(a, dtype=float)
    if z.shape != a.shape:
        raise DimensionMismatchError(f"iterate {z.shape} and row {a.shape} differ")
    inner = float(a @ z)
    eta = signum(inner) * b - inner
    return z + eta * a


@dataclass
class RowSelector:
    """Row-sampling distribution over the rows of a matrix"""
    mode: str
    cumulative: np.ndarray

    @classmethod
    def from_matrix(cls, matrix, mode='uniform'):
        if mode not in SELECTOR_MODES:
            raise InvalidParameterError(f"unknown selector mode {mode!r}")
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        m = matrix.shape[0]
        if m == 0:
            raise EmptyMeasureError("cannot select rows from an empty matrix")
        if mode == 'uniform':
            weights = np.ones(m)
        else:
            weights = np.einsum('ij,ij->i', matrix, matrix)
            if not np.any(weights > 0):
                raise DegenerateRowError("all rows are zero")
        cumulative = np.cumsum(weights / weights.sum())
        cumulative[-1] = 1.0
        return cls(mode, cumulative)

    @property
    def probabilities(self):
        return np.diff(self.cumulative, prepend=0.0)

    def draw(self, rng):
        index = int(np.searchsorted(self.cumulative, rng.uniform(), side='right'))
        return min(index, self.cumulative.size - 1)


class FiniteRowMeasure:
    """mu_A: rows of a measurement set chosen by a RowSelector"""
    synthetic_only = False

    def __init__(self, ms, selector='uniform'):
        if ms.m == 0:
            raise EmptyMeasureError("measurement set has no rows")
        self.ms = ms
        self.selector = selector if isinstance(selector, RowSelector) else \
            RowSelector.from_matrix(ms.matrix, selector)

    @property
    def n(self):
        return self.ms.n

    @property
    def label(self):
        return self.selector.mode

    def draw(self, rng):
        i = self.selector.draw(rng)
        return self.ms.matrix[i], float(self.ms.magnitudes[i])


class UniformSphereMeasure:
    """Unlimited measurements: a fresh uniform row per step, b = |<a, x>| on the fly"""
    synthetic_only = True
    label = 'uniform-sphere'

    def __init__(self, signal):
        if signal is None:
            raise InvalidParameterError("the uniform-sphere oracle needs the hidden signal")
        self.signal = signal if isinstance(signal, Signal) else Signal(signal)

    @property
    def n(self):
        return self.signal.n

    def draw(self, rng):
        a = sample_uniform_sphere(self.n, rng).coords
        return a, abs(float(a @ self.signal.x))


def as_measure(source, selector='uniform'):
    if isinstance(source, (FiniteRowMeasure, UniformSphereMeasure)):
        return source
    if isinstance(source, MeasurementSet):
        return FiniteRowMeasure(source, selector)
    raise InvalidParameterError(f"cannot build a row measure from {type(source).__name__}")


def generalized_projection(z, mu, rng):
    """One Kaczmarz projection with the row drawn from the measure mu"""
    a, b = as_measure(mu).draw(rng)
    return pr_kaczmarz_step(z, a, b)


@dataclass
class SolverState:
    """Iterate X_k, step count k and the realization of the escape time tau"""
    iterate: np.ndarray
    rng: Rng
    step: int = 0
    basin_escaped: bool = False
    escape_step: Optional[int] = None

    def advance(self, iterate):
        self.iterate = iterate
        self.step += 1

    def mark_escape(self):
        if not self.basin_escaped:
            self.basin_escaped = True
            self.escape_step = self.step


@dataclass
class TraceRecord:
    step: int
    dist: float
    angle: float
    residual: float


@dataclass
class ConvergenceTrace:
    """K+1 per-step records (step 0 included) plus a config echo"""
    records: List[TraceRecord]
    config: dict
    final_iterate: np.ndarray
    basin_escaped: bool = False
    escape_step: Optional[int] = None

    @property
    def initial_dist(self):
        return self.records[0].dist

    @property
    def final_dist(self):
        return self.records[-1].dist

    @property
    def iterations(self):
        return len(self.records) - 1

    def to_frame(self):
        return pd.DataFrame([vars(r) for r in self.records], columns=TRACE_COLUMNS)

    def metadata(self):
        return dict(self.config, basin_escaped=self.basin_escaped, escape_step=self.escape_step)


@dataclass
class RunSummary:
    final_dist: float
    success: Optional[bool]
    wall_clock: float
    iterations: int
    escaped: bool
    escape_step: Optional[int] = None

    def to_dict(self):
        return dict(vars(self))


def success_from_frame(frame, eps):
    """dist_K^2 <= eps * dist_0^2, from the trace table alone"""
    dist0, distk = float(frame['dist'].iloc[0]), float(frame['dist'].iloc[-1])
    if math.isnan(dist0) or math.isnan(distk):
        return None
    return bool(distk ** 2 <= eps * dist0 ** 2)


def summarize(trace, eps, wall_clock=0.0):
    return RunSummary(
        final_dist=trace.final_dist,
        success=success_from_frame(trace.to_frame(), eps),
        wall_clock=wall_clock,
        iterations=trace.iterations,
        escaped=trace.basin_escaped,
        escape_step=trace.escape_step,
    )


def _record(step, z, ms, x):
    if x is not None:
        dist = dist_to_sign_set(z, x)
        angle = angle_to(z, x)
    else:
        dist = angle = float('nan')
    if ms is not None:
        residual = float(np.linalg.norm(residual_vector(ms, z)))
    else:
        residual = float('nan')
    return TraceRecord(step, dist, angle, residual)


def run(source, x0, K, rng, signal=None, selector='uniform', basin_angle=BASIN_ANGLE,
        stop_on_escape=False):
    """Apply K independent generalized projections starting from x0.

    `source` is a MeasurementSet (rows drawn by `selector`) or a
    UniformSphereMeasure. Metrics needing the signal are NaN when it is
    unknown. Angles are taken against the sign of the signal nearer x0, and
    the basin flag is raised the first time that angle exceeds `basin_angle`
    (equality counts as inside).
    """
    if K < 0:
        raise InvalidParameterError(f"iteration count must be nonnegative, got {K}")
    measure = as_measure(source, selector)
    ms = measure.ms if isinstance(measure, FiniteRowMeasure) else None
    if signal is None:
        signal = ms.signal if ms is not None else measure.signal
    elif not isinstance(signal, Signal):
        signal = Signal(signal)
    x = signal.x if signal is not None else None

    z = np.array(x0, dtype=float)
    if z.shape != (measure.n,):
        raise DimensionMismatchError(f"x0 has shape {z.shape}, expected ({measure.n},)")

    # The basin is centred on whichever of +x, -x is closer to x0; a later
    # drift toward the other sign is still an escape.
    if x is not None:
        x = signum(float(z @ x)) * x

    state = SolverState(iterate=z, rng=rng)
    records = [_record(0, z, ms, x)]
    if x is not None and records[0].angle > basin_angle:
        state.mark_escape()
    for _ in range(K):
        a, b = measure.draw(rng)
        state.advance(pr_kaczmarz_step(state.iterate, a, b))
        record = _record(state.step, state.iterate, ms, x)
        records.append(record)
        if x is not None and record.angle > basin_angle:
            state.mark_escape()
            if stop_on_escape:
                break

    config = {'K': K, 'seed': rng.seed, 'stream': rng.stream, 'selector': measure.label}
    logger.debug("Run finished", K=K, seed=rng.seed, final_dist=records[-1].dist,
                 escaped=state.basin_escaped)
    return ConvergenceTrace(records, config, state.iterate, state.basin_escaped, state.escape_step)


def run_linear(A, b, x0, K, rng, x_true, selector='squared-norm'):
    """Classical randomized Kaczmarz; returns ||x_k - x||^2 for k = 0..K"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    row_selector = RowSelector.from_matrix(A, selector)
    z = np.array(x0, dtype=float)
    errors = np.empty(K + 1)
    errors[0] = float(np.sum((z - x_true) ** 2))
    for k in range(1, K + 1):
        i = row_selector.draw(rng)
        z = linear_kaczmarz_step(z, A[i], b[i])
        errors[k] = float(np.sum((z - x_true) ** 2))
    return errors


def theorem_iterations(eps, delta2, n):
    """K = ceil(2 (log(1/eps) + log(2/delta2)) n)"""
    return math.ceil(2 * (math.log(1 / eps) + math.log(2 / delta2)) * n)


def corollary_iterations(eps, delta2, n, alpha=ALPHA_SIGMA):
    """k = ceil((log(2/eps) + log(1/delta2)) n / alpha)"""
    return math.ceil((math.log(2 / eps) + math.log(1 / delta2)) * n / alpha)


def escape_probability_bound(delta, basin_angle=BASIN_ANGLE):
    """(delta / sin(basin_angle))^2, the supermartingale bound on P(tau < inf)"""
    return (delta / math.sin(basin_angle)) ** 2


def select_majority(estimates, radius):
    """First estimate whose closed radius-ball holds at least ceil(L/2) estimates.

    Returns (index or None, cluster sizes of every estimate).
    """
    points = np.atleast_2d(np.asarray(estimates, dtype=float))
    L = points.shape[0]
    distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    cluster_sizes = (distances <= radius).sum(axis=1)
    needed = math.ceil(L / 2)
    for index, size in enumerate(cluster_sizes):
        if size >= needed:
            return index, cluster_sizes.tolist()
    return None, cluster_sizes.tolist()


@dataclass
class EnsembleResult:
    estimate: np.ndarray
    chosen_trial: int
    cluster_size: int
    radius: float
    estimates: np.ndarray
    cluster_sizes: List[int] = field(default_factory=list)
    traces: List[ConvergenceTrace] = field(default_factory=list)


def _ensemble_trial(ms, x0, K, rng, selector):
    return run(ms, x0, K, rng, selector=selector)


def ensemble_rk(ms, x0, K, L, eps, rng, radius=None, rho=None, selector='uniform', n_jobs=1):
    """Run L independent K-step solves from x0 and return the majority-ball estimate.

    The ball radius is `radius` when given, otherwise 2 sqrt(eps) rho with rho
    an upper bound on ||x0 - x||.
    """
    if L < 1:
        raise InvalidParameterError(f"trial count must be at least 1, got {L}")
    if radius is None:
        if rho is None:
            raise InvalidParameterError("give either the ball radius or rho, a bound on ||x0 - x||")
        radius = 2.0 * math.sqrt(eps) * rho
    if radius <= 0:
        raise InvalidParameterError(f"ball radius must be positive, got {radius}")

    traces = Parallel(n_jobs=n_jobs)(
        delayed(_ensemble_trial)(ms, x0, K, rng.child(trial), selector) for trial in range(L)
    )
    estimates = np.array([trace.final_iterate for trace in traces])
    index, cluster_sizes = select_majority(estimates, radius)
    if index is None:
        logger.warning("Ensemble found no majority ball", L=L, radius=radius)
        raise NoMajorityError(
            f"no estimate has {math.ceil(L / 2)} of {L} estimates within radius {radius:.6g}",
            cluster_sizes)
    logger.debug("Ensemble selected estimate", trial=index, cluster_size=cluster_sizes[index])
    return EnsembleResult(estimates[index], index, cluster_sizes[index], radius, estimates,
                          cluster_sizes, traces)


def perturbed_start(signal, delta, rng):
    """x0 with ||x0 - x|| = delta ||x|| in a uniformly random direction"""
    direction = sample_uniform_sphere(signal.n, rng).coords
    return signal.x + delta * signal.norm * direction


def _escape_trial(n, delta, K, rng):
    signal = Signal(sample_uniform_sphere(n, rng).coords)
    x0 = perturbed_start(signal, delta, rng)
    if delta == 0:
        return False
    trace = run(UniformSphereMeasure(signal), x0, K, rng, stop_on_escape=True)
    return trace.basin_escaped


def estimate_escape_probability(n, delta, trials, K, rng, n_jobs=1):
    """Fraction of uniform-measure runs whose iterate ever leaves the basin"""
    if not 0 <= delta < math.sin(BASIN_ANGLE):
        raise OutOfBasinError(f"delta must lie in [0, sin(pi/8)), got {delta}")
    if trials < 1:
        raise InvalidParameterError(f"need at least one trial, got {trials}")
    started = time.perf_counter()
    escaped = Parallel(n_jobs=n_jobs)(
        delayed(_escape_trial)(n, delta, K, rng.child(t)) for t in range(trials)
    )
    frequency = float(np.mean(escaped))
    logger.debug("Escape probability estimated", n=n, delta=delta, trials=trials, K=K,
                 frequency=frequency, seconds=time.perf_counter() - started)
    return frequency
