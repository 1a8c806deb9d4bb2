import math

import numpy as np
import pytest
import scipy.stats

from core_math import (
    Rng,
    SymMatrix,
    UnitVector,
    angle_between,
    angle_to,
    dist_to_sign_set,
    random_orthogonal,
    sample_uniform_sphere,
    sample_uniform_sphere_batch,
    signum,
    sym_eig,
)
from errors import DimensionMismatchError, InvalidDimensionError, InvalidParameterError, NumericInputError


class TestRng:
    def test_same_seed_replays_draws(self):
        assert np.array_equal(Rng(3).standard_normal(8), Rng(3).standard_normal(8))

    def test_streams_and_children_differ(self):
        base = Rng(3).standard_normal(8)
        assert not np.array_equal(base, Rng(3, stream=1).standard_normal(8))
        assert not np.array_equal(base, Rng(3).child(0).standard_normal(8))
        assert np.array_equal(Rng(3).child(2).standard_normal(4), Rng(3).child(2).standard_normal(4))

    @pytest.mark.parametrize('seed', [-1, 2 ** 64])
    def test_seed_out_of_range(self, seed):
        with pytest.raises(InvalidParameterError):
            Rng(seed)


def test_signum_zero_is_positive():
    assert signum(0.0) == 1.0
    assert signum(-0.5) == -1.0
    assert list(signum(np.array([-1.0, 0.0, 2.0]))) == [-1.0, 1.0, 1.0]


def test_unit_vector_renormalizes_and_is_read_only():
    u = UnitVector(np.array([3.0, 4.0]))
    assert np.allclose(u.coords, [0.6, 0.8])
    with pytest.raises(ValueError):
        u.coords[0] = 1.0
    with pytest.raises(InvalidParameterError):
        UnitVector(np.zeros(3))


def test_sym_matrix_mirrors_upper_triangle():
    s = SymMatrix(np.array([[1.0, 2.0], [5.0, 3.0]]))
    assert s.entries[1, 0] == s.entries[0, 1] == 2.0
    assert (s * 2.0).entries[1, 1] == 6.0


class TestSphere:
    def test_unit_norm(self, rng):
        u = sample_uniform_sphere(7, rng)
        assert abs(np.linalg.norm(u.coords) - 1.0) <= 1e-12

    def test_n_one_gives_plus_minus_one(self, rng):
        assert abs(sample_uniform_sphere(1, rng).coords[0]) == pytest.approx(1.0)

    def test_invalid_dimension(self, rng):
        with pytest.raises(InvalidDimensionError):
            sample_uniform_sphere(0, rng)

    def test_batch_rows_are_unit(self, rng):
        draws = sample_uniform_sphere_batch(4, 1000, rng)
        assert draws.shape == (1000, 4)
        assert np.allclose(np.linalg.norm(draws, axis=1), 1.0)

    def test_mean_is_near_zero(self, rng):
        draws = sample_uniform_sphere_batch(3, 20000, rng)
        assert np.all(np.abs(draws.mean(axis=0)) < 0.02)

    def test_rotation_invariance(self):
        n, draws = 6, 10 ** 4
        rng = Rng(21)
        q = random_orthogonal(n, rng.child(0))
        w = sample_uniform_sphere(n, rng.child(1)).coords
        rotated = sample_uniform_sphere_batch(n, draws, rng.child(2)) @ q.T @ w
        plain = sample_uniform_sphere_batch(n, draws, rng.child(3)) @ w
        assert scipy.stats.ks_2samp(rotated, plain).pvalue > 0.01


class TestDistances:
    def test_angle_between_axes(self):
        assert angle_between([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.pi / 2)

    def test_angle_to_zero_vector(self):
        assert angle_to(np.zeros(3), np.ones(3)) == pytest.approx(math.pi / 2)

    def test_sign_set_distance(self):
        x = np.array([1.0, 2.0, -1.0])
        assert dist_to_sign_set(-x, x) == 0.0
        assert dist_to_sign_set(x + np.array([0.0, 0.0, 0.5]), x) == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            dist_to_sign_set(np.ones(2), np.ones(3))


def test_random_orthogonal_is_orthogonal(rng):
    q = random_orthogonal(6, rng)
    assert np.allclose(q.T @ q, np.eye(6), atol=1e-12)


class TestSymEig:
    def test_diagonal(self):
        values, vectors = sym_eig(np.diag([3.0, -1.0, 2.0]))
        assert np.allclose(values, [-1.0, 2.0, 3.0])
        assert np.allclose(np.abs(vectors), np.eye(3)[:, [1, 2, 0]])

    def test_matches_lapack(self, rng):
        g = rng.standard_normal((12, 12))
        a = g + g.T
        values, vectors = sym_eig(a)
        assert np.allclose(values, np.linalg.eigvalsh(a), atol=1e-10)
        assert np.allclose(vectors @ np.diag(values) @ vectors.T, a, atol=1e-9)
        assert np.allclose(vectors.T @ vectors, np.eye(12), atol=1e-10)

    def test_large_matrix_uses_lapack_path(self, rng):
        g = rng.standard_normal((130, 130))
        values, _ = sym_eig(g + g.T)
        assert np.all(np.diff(values) >= 0)

    def test_rejects_non_finite(self):
        with pytest.raises(NumericInputError):
            sym_eig(np.array([[1.0, np.nan], [np.nan, 1.0]]))
