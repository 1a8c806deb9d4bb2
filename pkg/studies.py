"""
Monte Carlo studies comparing measured behaviour with the analytic bounds.

Every study returns a pandas DataFrame with one row per configuration.
Trials run through joblib and draw from ``rng.child(config).child(trial)``,
so the numbers do not depend on the worker count.
"""
import math

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from acw_audit import audit, decrement_bound_uniform
from config import AUDIT_CONFIG, SOLVER_CONFIG, SPECTRAL_CONFIG
from core_math import dist_to_sign_set, sample_uniform_sphere, sample_uniform_sphere_batch, signum
from errors import InvalidParameterError
from kaczmarz_solver import (
    ALPHA_SIGMA,
    UniformSphereMeasure,
    escape_probability_bound,
    estimate_escape_probability,
    run,
    run_linear,
    theorem_iterations,
)
from logger import get_logger
from measurement_model import Signal, generate_uniform_instance
from spectral_init import initialize, random_init

logger = get_logger(__name__)

DRAW_CHUNK = 100000
INIT_QUALITY_THRESHOLD = SPECTRAL_CONFIG['quality_threshold']


def _stderr(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float('nan')
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def _binomial_stderr(p, trials):
    return math.sqrt(p * (1.0 - p) / trials)


def point_at_angle(x, theta, rng):
    """Unit vector at angle theta from the unit vector x"""
    g = rng.standard_normal(x.size)
    g -= (g @ x) * x
    g /= np.linalg.norm(g)
    return math.cos(theta) * x + math.sin(theta) * g


def one_step_ratios(x, z, draws, rng):
    """||Pz - x||^2 / ||z - x||^2 for independent uniform rows a"""
    base = float(np.sum((z - x) ** 2))
    ratios = []
    for start in range(0, draws, DRAW_CHUNK):
        a = sample_uniform_sphere_batch(x.size, min(DRAW_CHUNK, draws - start), rng)
        inner_z, inner_x = a @ z, np.abs(a @ x)
        eta = signum(inner_z) * inner_x - inner_z
        projected = z[None, :] + eta[:, None] * a
        ratios.append(np.sum((projected - x[None, :]) ** 2, axis=1) / base)
    return np.concatenate(ratios)


def decrement_curve(params, rng, n_jobs=1):
    """Expected one-step decrement of the uniform measure over a theta grid"""
    rows = []
    grid = [(n, theta) for n in params.get('n') or [4]
            for theta in params.get('theta') or [math.pi / 32, math.pi / 16, math.pi / 8]]
    for index, (n, theta) in enumerate(grid):
        stream = rng.child(index)
        x = sample_uniform_sphere(n, stream).coords
        z = point_at_angle(x, theta, stream)
        ratios = one_step_ratios(x, z, params.get('draws', 100000), stream)
        rows.append({'n': n, 'theta': theta, 'draws': ratios.size, 'mean': float(ratios.mean()),
                     'stderr': _stderr(ratios), 'bound': decrement_bound_uniform(theta, n)})
    return pd.DataFrame(rows)


def escape_prob(params, rng, n_jobs=1):
    """Frequency of leaving the pi/8 basin against (delta / sin(pi/8))^2"""
    rows = []
    trials = params.get('trials', 100)
    grid = [(n, delta) for n in params.get('n') or [10] for delta in params.get('delta') or [0.1]]
    for index, (n, delta) in enumerate(grid):
        K = params.get('K') or 200 * n
        frequency = estimate_escape_probability(n, delta, trials, K, rng.child(index), n_jobs=n_jobs)
        rows.append({'n': n, 'delta': delta, 'K': K, 'trials': trials, 'mean': frequency,
                     'stderr': _binomial_stderr(frequency, trials),
                     'bound': escape_probability_bound(delta)})
    return pd.DataFrame(rows)


def _rate_trial(n, K, rng):
    signal = Signal(sample_uniform_sphere(n, rng).coords)
    x0 = signal.x + 0.1 * sample_uniform_sphere(n, rng).coords
    trace = run(UniformSphereMeasure(signal), x0, K, rng)
    return (trace.final_dist ** 2 / trace.initial_dist ** 2) ** (1.0 / K)


def rate_vs_n(params, rng, n_jobs=1):
    """Per-step contraction factor from starts inside the basin"""
    rows = []
    trials = params.get('trials', 100)
    for index, n in enumerate(params.get('n') or [5, 10, 20]):
        K = params.get('K') or 10 * n
        stream = rng.child(index)
        rates = Parallel(n_jobs=n_jobs)(
            delayed(_rate_trial)(n, K, stream.child(t)) for t in range(trials)
        )
        rows.append({'n': n, 'K': K, 'trials': trials, 'mean': float(np.mean(rates)),
                     'stderr': _stderr(rates), 'bound': 1.0 - ALPHA_SIGMA / n})
    return pd.DataFrame(rows)


def _linear_trial(n, K, rng):
    x_true = rng.standard_normal(n)
    errors = run_linear(np.eye(n), x_true, np.zeros(n), K, rng, x_true)
    return errors / errors[0]


def linear_baseline(params, rng, n_jobs=1):
    """Classical randomized Kaczmarz on the identity system, rows per step k"""
    rows = []
    trials = params.get('trials', 100)
    for index, n in enumerate(params.get('n') or [5]):
        K = params.get('K') or 10
        stream = rng.child(index)
        ratios = np.array(Parallel(n_jobs=n_jobs)(
            delayed(_linear_trial)(n, K, stream.child(t)) for t in range(trials)
        ))
        means = ratios.mean(axis=0)
        for k in range(1, K + 1):
            rows.append({'n': n, 'step': k, 'trials': trials, 'mean': float(means[k]),
                         'stderr': _stderr(ratios[:, k]), 'per_step': float(means[k] / means[k - 1]),
                         'bound': (1.0 - 1.0 / n) ** k})
    return pd.DataFrame(rows)


def _init_trial(n, m, rng):
    signal = Signal(sample_uniform_sphere(n, rng).coords)
    ms = generate_uniform_instance(n, m, signal, rng)
    return dist_to_sign_set(initialize(ms).x0, signal.x) / signal.norm


def init_quality(params, rng, n_jobs=1):
    """Relative error of the truncated spectral estimate"""
    rows = []
    trials = params.get('trials', 100)
    grid = [(n, m) for n in params.get('n') or [50]
            for m in params.get('m') or [SOLVER_CONFIG['m_factor'] * n]]
    for index, (n, m) in enumerate(grid):
        stream = rng.child(index)
        errors = Parallel(n_jobs=n_jobs)(
            delayed(_init_trial)(n, m, stream.child(t)) for t in range(trials)
        )
        rows.append({'n': n, 'm': m, 'trials': trials, 'mean': float(np.mean(errors)),
                     'stderr': _stderr(errors),
                     'within_threshold': float(np.mean(np.asarray(errors) <= INIT_QUALITY_THRESHOLD)),
                     'bound': float('nan')})
    return pd.DataFrame(rows)


def _arbitrary_trial(n, m, K, eps, rng):
    signal = Signal(sample_uniform_sphere(n, rng).coords)
    ms = generate_uniform_instance(n, m, signal, rng)
    x0 = random_init(n, 1.0, rng)
    trace = run(ms, x0, K, rng)
    return trace.final_dist ** 2 <= eps * trace.initial_dist ** 2


def arbitrary_init(params, rng, n_jobs=1):
    """Success rate from random-direction starts; empirical only"""
    rows = []
    trials = params.get('trials', 100)
    eps = params.get('eps', 1e-4)
    grid = [(n, m) for n in params.get('n') or [20]
            for m in params.get('m') or [SOLVER_CONFIG['m_factor'] * n]]
    for index, (n, m) in enumerate(grid):
        K = params.get('K') or theorem_iterations(eps, SOLVER_CONFIG['delta2'], n)
        stream = rng.child(index)
        successes = Parallel(n_jobs=n_jobs)(
            delayed(_arbitrary_trial)(n, m, K, eps, stream.child(t)) for t in range(trials)
        )
        rate = float(np.mean(successes))
        rows.append({'n': n, 'm': m, 'K': K, 'trials': trials, 'mean': rate,
                     'stderr': _binomial_stderr(rate, trials), 'bound': float('nan')})
    return pd.DataFrame(rows)


def acw_vs_m(params, rng, n_jobs=1):
    """Audit of uniform instances of growing size at a fixed wedge angle"""
    rows = []
    theta = (params.get('theta') or [0.1])[0]
    alpha = AUDIT_CONFIG['alpha_target']
    grid = [(n, m) for n in params.get('n') or [10] for m in params.get('m') or [100, 500, 2000]]
    for index, (n, m) in enumerate(grid):
        stream = rng.child(index)
        ms = generate_uniform_instance(n, m, Signal(sample_uniform_sphere(n, stream).coords), stream)
        report = audit(ms, theta, alpha, params.get('wedges', 200), stream.child(1), n_jobs=n_jobs)
        rows.append({'n': n, 'm': m, 'theta': theta, 'wedges': report.wedges_tested,
                     'min_margin': report.min_margin, 'alpha': alpha,
                     'max_wedge_measure': report.max_wedge_measure,
                     'measure_bound': report.measure_bound, 'pass': report.passed})
    return pd.DataFrame(rows)


STUDIES = {
    'decrement-curve': decrement_curve,
    'escape-prob': escape_prob,
    'rate-vs-n': rate_vs_n,
    'linear-baseline': linear_baseline,
    'init-quality': init_quality,
    'arbitrary-init': arbitrary_init,
    'acw-vs-m': acw_vs_m,
}


def run_study(name, params, rng, n_jobs=1):
    try:
        study = STUDIES[name]
    except KeyError:
        raise InvalidParameterError(f"unknown study {name!r}; choose from {sorted(STUDIES)}") from None
    logger.info("Starting study", study=name, seed=rng.seed)
    frame = study(params, rng, n_jobs=n_jobs)
    logger.info("Study finished", study=name, rows=len(frame))
    return frame
