import json

import numpy as np
import pytest
import scipy.stats

from core_math import Rng, random_orthogonal
from errors import (
    ArtifactIOError,
    DegenerateRowError,
    DimensionMismatchError,
    InvalidParameterError,
    InvalidSignalError,
)
from measurement_model import (
    MeasurementMeta,
    MeasurementSet,
    Signal,
    amplitude_flow_loss,
    generate_gaussian_rows,
    generate_uniform_instance,
    load_instance,
    measurements_from_rows,
    residual_vector,
    save_instance,
)


class TestSignal:
    def test_zero_vector_rejected(self):
        with pytest.raises(InvalidSignalError):
            Signal(np.zeros(4))

    def test_norm_is_cached(self):
        assert Signal(np.array([3.0, 4.0])).norm == 5.0


class TestGeneration:
    def test_uniform_instance(self, instance, signal):
        assert (instance.m, instance.n) == (100, 5)
        assert len(instance.rows) == 100
        assert np.array_equal(instance.rows[3].coords, instance.matrix[3])
        assert np.allclose(np.linalg.norm(instance.matrix, axis=1), 1.0, atol=1e-12)
        assert np.allclose(instance.magnitudes, np.abs(instance.matrix @ signal.x))
        assert instance.meta.generator == 'uniform'

    def test_same_seed_same_instance(self, signal):
        a = generate_uniform_instance(5, 30, signal, Rng(1))
        b = generate_uniform_instance(5, 30, signal, Rng(1))
        assert np.array_equal(a.matrix, b.matrix)

    def test_gaussian_rows_are_normalized(self, signal):
        ms = generate_gaussian_rows(5, 40, signal, Rng(2))
        assert np.allclose(np.linalg.norm(ms.matrix, axis=1), 1.0, atol=1e-12)
        assert ms.meta.generator == 'gaussian'

    def test_gaussian_rows_match_uniform_sphere(self, signal):
        gaussian = generate_gaussian_rows(5, 10 ** 4, signal, Rng(31)).matrix
        uniform = generate_uniform_instance(5, 10 ** 4, signal, Rng(32)).matrix
        w = np.array([0.5, -0.5, 0.5, 0.5, 0.0])
        assert scipy.stats.ks_2samp(gaussian @ w, uniform @ w).pvalue > 0.01

    def test_signal_length_mismatch(self, signal):
        with pytest.raises(DimensionMismatchError):
            generate_uniform_instance(4, 10, signal, Rng(0))


class TestMeasurementSet:
    def test_rejects_non_unit_rows(self):
        with pytest.raises(DegenerateRowError):
            MeasurementSet(np.array([[2.0, 0.0]]), np.array([1.0]), MeasurementMeta(2, 1, 'custom', None))

    def test_rejects_inconsistent_signal(self):
        with pytest.raises(InvalidParameterError):
            MeasurementSet(np.eye(2), np.array([1.0, 0.5]), MeasurementMeta(2, 2, 'custom', None),
                           Signal(np.array([1.0, 1.0])))

    def test_is_read_only(self, instance):
        with pytest.raises(ValueError):
            instance.matrix[0, 0] = 0.0

    def test_scaled(self, instance):
        scaled = instance.scaled(3.0)
        assert np.allclose(scaled.magnitudes, 3.0 * instance.magnitudes)
        assert np.allclose(scaled.signal.x, 3.0 * instance.signal.x)

    def test_rotated_keeps_consistency(self, instance):
        q = random_orthogonal(5, Rng(4))
        rotated = instance.rotated(q)
        assert np.allclose(rotated.magnitudes, instance.magnitudes, atol=1e-12)
        assert np.allclose(rotated.signal.x, q @ instance.signal.x)


class TestFromRows:
    def test_zero_row_rejected(self):
        with pytest.raises(DegenerateRowError):
            measurements_from_rows(np.array([[1.0, 0.0], [0.0, 0.0]]), signal=np.ones(2))

    def test_needs_signal_or_magnitudes(self):
        with pytest.raises(InvalidParameterError):
            measurements_from_rows(np.eye(2))

    def test_given_magnitudes(self):
        ms = measurements_from_rows(np.array([[2.0, 0.0], [0.0, 5.0]]), magnitudes=[3.0, 4.0])
        assert ms.signal is None
        assert np.array_equal(ms.matrix, np.eye(2))


class TestLoss:
    def test_zero_at_signal_and_its_negative(self, instance, signal):
        assert amplitude_flow_loss(instance, signal.x) == pytest.approx(0.0, abs=1e-24)
        assert amplitude_flow_loss(instance, -signal.x) == pytest.approx(0.0, abs=1e-24)

    def test_value(self):
        ms = measurements_from_rows(np.eye(2), magnitudes=[1.0, 1.0])
        # residuals (|2| - 1, |0| - 1) = (1, -1)
        assert np.allclose(residual_vector(ms, np.array([2.0, 0.0])), [1.0, -1.0])
        assert amplitude_flow_loss(ms, np.array([2.0, 0.0])) == pytest.approx(0.5)


class TestInstanceFile:
    def test_save_and_load(self, instance, tmp_path):
        path = save_instance(instance, tmp_path / 'inst.json')
        loaded = load_instance(path)
        assert np.array_equal(loaded.matrix, instance.matrix)
        assert np.array_equal(loaded.magnitudes, instance.magnitudes)
        assert np.array_equal(loaded.signal.x, instance.signal.x)
        assert loaded.meta == instance.meta

    def test_without_signal(self, instance, tmp_path):
        path = save_instance(instance, tmp_path / 'inst.json', include_signal=False)
        assert 'signal' not in json.loads(path.read_text())
        assert load_instance(path).signal is None

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            load_instance(tmp_path / 'missing.json')

    def test_bad_schema(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'schema_version': 1, 'n': 2, 'm': 1, 'generator': 'x',
                                    'rows': [[1.0, 0.0], [0.0, 1.0]], 'magnitudes': [1.0]}))
        with pytest.raises(InvalidParameterError):
            load_instance(path)
