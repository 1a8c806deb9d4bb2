"""
cli.py
Command-line front end for the phase-retrieval Kaczmarz toolkit.

Usage:
    python cli.py gen --n 10 --m 200 --seed 1 --out inst.json
    python cli.py solve --instance inst.json --init spectral --eps 1e-4
    python cli.py ensemble --instance inst.json --L 16
    python cli.py acw-audit --instance inst.json --theta 0.1 --refine
    python cli.py study escape-prob --delta 0.1 --K 2000 --trials 500

Every command prints one JSON envelope on stdout and exits with
0 (success), 2 (validation), 3 (no majority), 4 (I/O) or 1 (internal).
"""
import argparse
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import sentry_sdk

from acw_audit import audit
from artifact_store import ArtifactStore
from config import SENTRY_DSN, SOLVER_CONFIG, get_build_tag, get_config
from core_math import Rng, sample_uniform_sphere
from errors import ArtifactIOError, InvalidParameterError, MetricUnavailableWarning
from kaczmarz_solver import ensemble_rk, run, summarize, theorem_iterations
from logger import get_logger, setup_logging
from measurement_model import (
    Signal,
    generate_gaussian_rows,
    generate_uniform_instance,
    load_instance,
    save_instance,
)
from responses import ErrorHandler, RunResponse
from spectral_init import initialize, norm_scale, random_init
from studies import run_study
from validators import STUDY_NAMES, Validator

logger = get_logger(__name__)


def _add_common(parser):
    parser.add_argument('--seed', type=int, help='Master seed (default 0)')
    parser.add_argument('--threads', type=int, help='Worker count; -1 uses every core')
    parser.add_argument('--out', type=str, help='Output file (gen) or directory')
    parser.add_argument('--config', type=str, help='JSON file with the same keys as the flags')


def _add_solve_flags(parser):
    parser.add_argument('--instance', type=str, help='InstanceFile path')
    parser.add_argument('--K', type=int, help='Iterations (default from eps, delta2, n)')
    parser.add_argument('--eps', type=float)
    parser.add_argument('--delta2', type=float)
    parser.add_argument('--init', choices=['spectral', 'given', 'random'])
    parser.add_argument('--x0', type=str, help='JSON file holding the start vector')
    parser.add_argument('--selector', choices=['uniform', 'squared-norm'])


def build_parser():
    # unset flags stay absent so config-file values survive
    parser = argparse.ArgumentParser(prog='prk', description=__doc__.split('\n\n')[0],
                                     argument_default=argparse.SUPPRESS)
    subparsers = parser.add_subparsers(dest='command', required=True)

    gen = subparsers.add_parser('gen', help='Generate a synthetic instance',
                                argument_default=argparse.SUPPRESS)
    _add_common(gen)
    gen.add_argument('--n', type=int)
    gen.add_argument('--m', type=int, help='Measurements (default 20n)')
    gen.add_argument('--generator', choices=['uniform', 'gaussian'])
    gen.add_argument('--signal-norm', dest='signal_norm', type=float)
    gen.add_argument('--no-signal', dest='no_signal', action='store_true')

    solve = subparsers.add_parser('solve', help='Initialize and run Kaczmarz',
                                  argument_default=argparse.SUPPRESS)
    _add_common(solve)
    _add_solve_flags(solve)

    ensemble = subparsers.add_parser('ensemble', help='Ensemble Kaczmarz with majority-ball selection',
                                     argument_default=argparse.SUPPRESS)
    _add_common(ensemble)
    _add_solve_flags(ensemble)
    ensemble.add_argument('--L', type=int, help='Independent trials')
    ensemble.add_argument('--radius', type=float)
    ensemble.add_argument('--rho', type=float, help='Upper bound on ||x0 - x||')
    ensemble.add_argument('--delta1', type=float)

    acw = subparsers.add_parser('acw-audit', help='Estimate the ACW margin of an instance',
                                argument_default=argparse.SUPPRESS)
    _add_common(acw)
    acw.add_argument('--instance', type=str)
    acw.add_argument('--theta', type=float)
    acw.add_argument('--alpha', type=float)
    acw.add_argument('--wedges', type=int)
    acw.add_argument('--refine', action='store_true')

    study = subparsers.add_parser('study', help='Monte Carlo study',
                                  argument_default=argparse.SUPPRESS)
    _add_common(study)
    study.add_argument('name', choices=STUDY_NAMES)
    study.add_argument('--n', type=int, nargs='+')
    study.add_argument('--m', type=int, nargs='+')
    study.add_argument('--delta', type=float, nargs='+')
    study.add_argument('--theta', type=float, nargs='+')
    study.add_argument('--K', type=int)
    study.add_argument('--trials', type=int)
    study.add_argument('--draws', type=int)
    study.add_argument('--eps', type=float)
    study.add_argument('--wedges', type=int)
    return parser


def resolve_config(args, settings=None):
    """Environment defaults, then config-file values, then explicit flags"""
    settings = settings or get_config()
    flags = {key: value for key, value in vars(args).items() if key != 'command'}
    data = {'threads': settings.THREADS}
    if flags.get('config'):
        document = ArtifactStore.read_json(flags['config'])
        if not isinstance(document, dict):
            raise ArtifactIOError(f"{flags['config']} must hold a JSON object")
        data.update(document)
    data.update(flags)
    return data


def _store(config):
    return ArtifactStore(config.get('out') or get_config().OUTPUT_DIR, get_build_tag())


def _load_vector(path, n):
    """Start vector from a JSON list or an object with an `x0` key"""
    document = ArtifactStore.read_json(path)
    if isinstance(document, dict):
        document = document.get('x0')
    if document is None:
        raise InvalidParameterError(f"{path} holds no start vector")
    x0 = np.asarray(document, dtype=float)
    if x0.shape != (n,):
        raise InvalidParameterError(f"start vector in {path} has shape {x0.shape}, expected ({n},)")
    return x0


def _start_vector(ms, config, rng):
    mode = config['init']
    if mode == 'spectral':
        result = initialize(ms)
        return result.x0, result.to_dict()
    if mode == 'given':
        x0 = _load_vector(config['x0'], ms.n)
        return x0, {'x0': x0.tolist()}
    _, norm_estimate = norm_scale(ms)
    x0 = random_init(ms.n, norm_estimate, rng)
    return x0, {'x0': x0.tolist()}


def _check_signal(ms):
    if ms.signal is None:
        warnings.warn("instance carries no signal; the trace reports residuals only",
                      MetricUnavailableWarning)
        logger.warning("Instance has no signal; distance metrics unavailable", m=ms.m, n=ms.n)


def cmd_generate(config):
    """Write a synthetic InstanceFile"""
    n = config['n']
    m = config['m'] or SOLVER_CONFIG['m_factor'] * n
    config = dict(config, m=m)
    rng = Rng(config['seed'])
    signal = Signal(config['signal_norm'] * sample_uniform_sphere(n, rng.child(0)).coords)
    generate = generate_gaussian_rows if config['generator'] == 'gaussian' else generate_uniform_instance
    ms = generate(n, m, signal, rng.child(1))

    out = config.get('out') or str(Path(get_config().OUTPUT_DIR) / f'instance-n{n}-m{m}-s{config["seed"]}.json')
    path = save_instance(ms, out, include_signal=not config['no_signal'])
    logger.info("Instance generated", path=str(path), n=n, m=m, generator=config['generator'])
    return {'path': str(path), 'n': n, 'm': m, 'generator': config['generator'], 'seed': config['seed']}


def cmd_solve(config):
    """Initialize, run K Kaczmarz steps and write trace plus summary"""
    ms = load_instance(config['instance'])
    _check_signal(ms)
    rng = Rng(config['seed'])
    K = config['K'] if config['K'] is not None else theorem_iterations(config['eps'], config['delta2'], ms.n)
    config = dict(config, K=K)

    x0, init = _start_vector(ms, config, rng.child(1))
    started = time.perf_counter()
    trace = run(ms, x0, K, rng.child(0), selector=config['selector'])
    summary = summarize(trace, config['eps'], time.perf_counter() - started)

    store = _store(config)
    trace_path = store.write_csv('trace.csv', trace.to_frame(), config=config)
    payload = {'summary': summary.to_dict(), 'init': init, 'final_iterate': trace.final_iterate.tolist(),
               'trace': str(trace_path)}
    summary_path = store.write_json('summary.json', payload, config=config)
    logger.info("Solve finished", final_dist=summary.final_dist, success=summary.success, K=K)
    return dict(payload, summary_path=str(summary_path))


def cmd_ensemble(config):
    """Run L trials and return the majority-ball estimate"""
    ms = load_instance(config['instance'])
    _check_signal(ms)
    rng = Rng(config['seed'])
    K = config['K'] if config['K'] is not None else theorem_iterations(config['eps'], config['delta2'], ms.n)
    rho = config['rho']
    if config['radius'] is None and rho is None:
        _, norm_estimate = norm_scale(ms)
        rho = SOLVER_CONFIG['ensemble_c'] * math.sqrt(config['delta1']) * norm_estimate
    config = dict(config, K=K, rho=rho)

    x0, init = _start_vector(ms, config, rng.child(1))
    started = time.perf_counter()
    result = ensemble_rk(ms, x0, K, config['L'], config['eps'], rng.child(0), radius=config['radius'],
                         rho=rho, selector=config['selector'], n_jobs=config['threads'])
    elapsed = time.perf_counter() - started

    payload = {
        'chosen_trial': result.chosen_trial,
        'cluster_size': result.cluster_size,
        'cluster_sizes': result.cluster_sizes,
        'radius': result.radius,
        'estimate': result.estimate.tolist(),
        'init': init,
        'trials': [summarize(trace, config['eps']).to_dict() for trace in result.traces],
        'wall_clock': elapsed,
    }
    path = _store(config).write_json('ensemble.json', payload, config=config)
    logger.info("Ensemble finished", chosen_trial=result.chosen_trial, cluster_size=result.cluster_size)
    return dict(payload, path=str(path))


def cmd_acw_audit(config):
    """Sample wedges, write the report JSON and the per-wedge CSV"""
    ms = load_instance(config['instance'])
    report = audit(ms, config['theta'], config['alpha'], config['wedges'], Rng(config['seed']),
                   refine=config['refine'], n_jobs=config['threads'])
    store = _store(config)
    wedges_path = store.write_csv('acw_wedges.csv', report.to_frame(), config=config)
    report_path = store.write_json('acw_report.json', report.to_dict(), config=config)
    return dict(report.to_dict(), report=str(report_path), wedges=str(wedges_path))


def cmd_study(config):
    """Run one Monte Carlo study and write its aggregate CSV"""
    frame = run_study(config['name'], config, Rng(config['seed']), n_jobs=config['threads'])
    path = _store(config).write_csv(f"study-{config['name']}.csv", frame, config=config)
    return {'study': config['name'], 'path': str(path), 'rows': frame.to_dict(orient='records')}


COMMANDS = {
    'gen': cmd_generate,
    'solve': cmd_solve,
    'ensemble': cmd_ensemble,
    'acw-audit': cmd_acw_audit,
    'study': cmd_study,
}


def init_error_tracking():
    if SENTRY_DSN:
        sentry_sdk.init(dsn=SENTRY_DSN, release=get_build_tag(), traces_sample_rate=0.0)
        logger.info("Sentry error tracking enabled")


def main(argv=None):
    args = build_parser().parse_args(argv)
    settings = get_config()
    setup_logging(settings)
    init_error_tracking()

    try:
        data = resolve_config(args, settings)
        config, errors = Validator().validate_command(args.command, data)
        if errors:
            logger.warning("Invalid configuration", command=args.command, errors=errors)
            response, code = ErrorHandler.handle_validation_error(errors)
        else:
            logger.info("Running command", command=args.command, seed=config['seed'], env=settings.ENV)
            response, code = RunResponse.success(COMMANDS[args.command](config),
                                                 f"{args.command} completed")
    except Exception as e:
        response, code = ErrorHandler.handle_exception(e, logger)

    RunResponse.emit(response)
    return code


if __name__ == "__main__":
    sys.exit(main())
