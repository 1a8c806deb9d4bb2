import json

import numpy as np
import pandas as pd
import pytest

import config
from cli import build_parser, main, resolve_config
from core_math import dist_to_sign_set
from measurement_model import load_instance, measurements_from_rows, save_instance
from responses import EXIT_ALGORITHM, EXIT_IO, EXIT_OK, EXIT_VALIDATION
from spectral_init import initialize


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, json.loads(capsys.readouterr().out)


@pytest.fixture
def instance_file(tmp_path, capsys):
    path = tmp_path / 'inst.json'
    code, _ = _run(capsys, 'gen', '--n', 5, '--m', 100, '--seed', 1, '--out', path)
    assert code == EXIT_OK
    return path


class TestGenerate:
    def test_writes_instance(self, instance_file):
        ms = load_instance(instance_file)
        assert (ms.n, ms.m) == (5, 100)
        assert ms.signal is not None

    def test_byte_identical_reruns(self, tmp_path, capsys):
        paths = [tmp_path / 'a.json', tmp_path / 'b.json']
        for path in paths:
            _run(capsys, 'gen', '--n', 4, '--m', 30, '--seed', 9, '--out', path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_zero_measurements_rejected(self, tmp_path, capsys):
        code, response = _run(capsys, 'gen', '--n', 4, '--m', 0, '--out', tmp_path / 'x.json')
        assert code == EXIT_VALIDATION
        assert 'm' in response['errors']

    def test_default_m_is_twenty_n(self, tmp_path, capsys):
        code, response = _run(capsys, 'gen', '--n', 3, '--out', tmp_path / 'x.json')
        assert code == EXIT_OK
        assert response['data']['m'] == 60


class TestSolve:
    def test_spectral_solve_writes_artifacts(self, instance_file, tmp_path, capsys):
        out = tmp_path / 'run'
        code, response = _run(capsys, 'solve', '--instance', instance_file, '--K', 600,
                              '--eps', 1e-4, '--out', out)
        assert code == EXIT_OK
        trace = pd.read_csv(out / 'trace.csv')
        assert len(trace) == 601
        sidecar = json.loads((out / 'trace.meta.json').read_text())
        assert sidecar['build'] == 'prk-test'
        assert sidecar['config']['K'] == 600
        summary = json.loads((out / 'summary.json').read_text())
        assert summary['payload']['summary']['iterations'] == 600
        assert response['data']['summary']['success'] is not None

    def test_zero_steps_report_init_quality(self, instance_file, tmp_path, capsys):
        code, response = _run(capsys, 'solve', '--instance', instance_file, '--K', 0, '--out', tmp_path)
        assert code == EXIT_OK
        summary = response['data']['summary']
        trace = pd.read_csv(tmp_path / 'trace.csv')
        assert summary['final_dist'] == pytest.approx(trace['dist'].iloc[0])

    def test_given_signal_stays_fixed(self, instance_file, tmp_path, capsys):
        x0_path = tmp_path / 'x0.json'
        x0_path.write_text(json.dumps({'x0': load_instance(instance_file).signal.x.tolist()}))
        code, _ = _run(capsys, 'solve', '--instance', instance_file, '--init', 'given', '--x0', x0_path,
                       '--K', 50, '--out', tmp_path)
        assert code == EXIT_OK
        assert (pd.read_csv(tmp_path / 'trace.csv')['dist'] <= 1e-12).all()

    def test_given_init_needs_x0(self, instance_file, capsys):
        code, response = _run(capsys, 'solve', '--instance', instance_file, '--init', 'given')
        assert code == EXIT_VALIDATION
        assert 'x0' in response['errors']

    def test_missing_instance(self, tmp_path, capsys):
        code, response = _run(capsys, 'solve', '--instance', tmp_path / 'nope.json', '--out', tmp_path)
        assert code == EXIT_IO
        assert response['error_code'] == 'IO_ERROR'

    def test_blind_instance_warns(self, instance_file, tmp_path, capsys):
        blind = tmp_path / 'blind.json'
        save_instance(load_instance(instance_file), blind, include_signal=False)
        with pytest.warns(UserWarning):
            code, response = _run(capsys, 'solve', '--instance', blind, '--K', 10, '--out', tmp_path)
        assert code == EXIT_OK
        assert response['data']['summary']['success'] is None

    def test_flags_override_config_file(self, instance_file, tmp_path, capsys):
        config = tmp_path / 'config.json'
        config.write_text(json.dumps({'instance': str(instance_file), 'K': 3, 'seed': 4, 'out': str(tmp_path)}))
        code, response = _run(capsys, 'solve', '--config', config, '--K', 7)
        assert code == EXIT_OK
        assert response['data']['summary']['iterations'] == 7


class TestEnsemble:
    def test_single_trial(self, instance_file, tmp_path, capsys):
        code, response = _run(capsys, 'ensemble', '--instance', instance_file, '--L', 1, '--K', 20,
                              '--out', tmp_path)
        assert code == EXIT_OK
        assert response['data']['chosen_trial'] == 0
        assert (tmp_path / 'ensemble.json').exists()

    def test_sixteen_trials_meet_the_majority_bound(self, tmp_path, capsys, make_instance):
        ms = make_instance(5, 1000, seed=3)
        path = save_instance(ms, tmp_path / 'inst.json')
        code, response = _run(capsys, 'ensemble', '--instance', path, '--L', 16, '--eps', 1e-6,
                               '--out', tmp_path)
        assert code == EXIT_OK
        data = response['data']
        assert len(data['trials']) == 16
        assert data['cluster_size'] >= 8
        start = dist_to_sign_set(initialize(ms).x0, ms.signal.x)
        assert dist_to_sign_set(np.array(data['estimate']), ms.signal.x) ** 2 <= 9e-6 * start ** 2

    def test_no_majority_exit_code(self, instance_file, tmp_path, capsys):
        code, response = _run(capsys, 'ensemble', '--instance', instance_file, '--L', 3, '--K', 3,
                              '--init', 'random', '--radius', 1e-300, '--out', tmp_path)
        assert code == EXIT_ALGORITHM
        assert response['error_code'] == 'NO_MAJORITY'
        assert response['data']['cluster_sizes'] == [1, 1, 1]

    def test_failure_budget(self, instance_file, capsys):
        code, _ = _run(capsys, 'ensemble', '--instance', instance_file, '--delta1', 0.3)
        assert code == EXIT_VALIDATION


class TestAudit:
    def test_report_and_wedge_table(self, tmp_path, capsys, make_instance):
        path = save_instance(make_instance(5, 3000, seed=2), tmp_path / 'big.json')
        code, response = _run(capsys, 'acw-audit', '--instance', path, '--theta', 0.1, '--wedges', 40,
                              '--out', tmp_path)
        assert code == EXIT_OK
        assert response['data']['kind'] == 'estimate'
        assert len(pd.read_csv(tmp_path / 'acw_wedges.csv')) == 40
        assert json.loads((tmp_path / 'acw_report.json').read_text())['payload']['wedges_tested'] == 40

    def test_duplicate_rows_fail(self, tmp_path, capsys, duplicate_row_instance):
        path = save_instance(duplicate_row_instance, tmp_path / 'dup.json')
        code, response = _run(capsys, 'acw-audit', '--instance', path, '--theta', 0.1, '--wedges', 20,
                              '--refine', '--out', tmp_path)
        assert code == EXIT_OK
        assert response['data']['pass'] is False

    def test_zero_wedges_rejected(self, instance_file, capsys):
        code, response = _run(capsys, 'acw-audit', '--instance', instance_file, '--theta', 0.1, '--wedges', 0)
        assert code == EXIT_VALIDATION
        assert 'wedges' in response['errors']


class TestStudy:
    def test_writes_csv(self, tmp_path, capsys):
        code, response = _run(capsys, 'study', 'linear-baseline', '--n', 4, '--K', 5, '--trials', 20,
                              '--out', tmp_path)
        assert code == EXIT_OK
        frame = pd.read_csv(tmp_path / 'study-linear-baseline.csv')
        assert list(frame['step']) == [1, 2, 3, 4, 5]
        assert len(response['data']['rows']) == 5

    def test_delta_outside_basin_rejected(self, capsys):
        code, _ = _run(capsys, 'study', 'escape-prob', '--delta', 0.5)
        assert code == EXIT_VALIDATION


def test_blind_rows_instance_round_trip(tmp_path):
    ms = measurements_from_rows([[1.0, 0.0], [0.0, 2.0]], magnitudes=[0.5, 0.25])
    assert load_instance(save_instance(ms, tmp_path / 'r.json')).signal is None


class TestDefaults:
    def test_threads_come_from_active_config(self):
        class Settings:
            THREADS = 3
        assert resolve_config(build_parser().parse_args(['gen', '--n', '3']), Settings)['threads'] == 3
        flagged = build_parser().parse_args(['gen', '--n', '3', '--threads', '2'])
        assert resolve_config(flagged, Settings)['threads'] == 2

    def test_output_dir_comes_from_active_config(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(config.TestingConfig, 'OUTPUT_DIR', str(tmp_path))
        code, response = _run(capsys, 'gen', '--n', 3, '--m', 10, '--seed', 2)
        assert code == EXIT_OK
        assert response['data']['path'] == str(tmp_path / 'instance-n3-m10-s2.json')
