import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpsa import linalg
from dpsa.errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetric,
    RankDeficient,
)


def rand(seed, shape):
    return np.random.default_rng(seed).standard_normal(shape)


class TestQR:
    def test_identity_columns(self):
        v = np.eye(3)[:, :2]
        q, r = linalg.qr_factor(v)
        assert np.allclose(q, v, atol=1e-14)
        assert np.allclose(r, np.eye(2), atol=1e-14)

    def test_hand_gram_schmidt(self):
        q, r = linalg.qr_factor([[3.0, 0.0], [4.0, 0.0], [0.0, 5.0]])
        assert np.allclose(q[:, 0], [0.6, 0.8, 0.0])
        assert r[0, 0] == pytest.approx(5.0)

    def test_reconstruction_random(self):
        v = rand(0, (6, 3))
        q, r = linalg.qr_factor(v)
        assert np.linalg.norm(q @ r - v) <= 1e-10 * np.linalg.norm(v)
        assert np.linalg.norm(q.T @ q - np.eye(3)) <= 1e-10

    def test_positive_diagonal_and_determinism(self):
        v = rand(1, (8, 4))
        q1, r1 = linalg.qr_factor(v)
        q2, r2 = linalg.qr_factor(v.copy())
        assert (np.diag(r1) > 0).all()
        assert (q1 == q2).all() and (r1 == r2).all()

    def test_rank_deficient(self):
        v = np.ones((5, 2))
        with pytest.raises(RankDeficient):
            linalg.qr_factor(v)

    def test_wide_input_rejected(self):
        with pytest.raises(DimensionMismatch):
            linalg.qr_factor(rand(2, (2, 3)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(2, 12), st.integers(1, 5))
    def test_reconstruction_property(self, seed, d, r):
        r = min(r, d)
        v = rand(seed, (d, r))
        q, r_up = linalg.qr_factor(v)
        assert np.linalg.norm(q @ r_up - v) <= 1e-10 * max(np.linalg.norm(v), 1.0)
        assert np.linalg.norm(q.T @ q - np.eye(r)) <= 1e-10


class TestCholesky:
    def test_identity(self):
        assert np.allclose(linalg.cholesky(np.eye(2)), np.eye(2))

    def test_hand_computation(self):
        r = linalg.cholesky([[4.0, 2.0], [2.0, 5.0]])
        assert np.allclose(r, [[2.0, 1.0], [0.0, 2.0]])
        assert np.allclose(r.T @ r, [[4.0, 2.0], [2.0, 5.0]])

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.cholesky([[1.0, 2.0], [2.0, 1.0]])

    def test_inverse_of_gram_map(self):
        # R -> R^T R followed by cholesky is the identity on
        # positive-diagonal upper-triangular matrices
        rng = np.random.default_rng(3)
        r = np.triu(rng.standard_normal((5, 5)))
        np.fill_diagonal(r, np.abs(np.diag(r)) + 0.5)
        back = linalg.cholesky(r.T @ r)
        assert np.linalg.norm(back - r) <= 1e-10 * np.linalg.norm(r)

    def test_asymmetric_rejected(self):
        with pytest.raises(NotSymmetric):
            linalg.cholesky([[1.0, 0.5], [0.0, 1.0]])


class TestSymEig:
    def test_diagonal(self):
        lam, vec = linalg.sym_eig(np.diag([3.0, 1.0]))
        assert np.allclose(lam, [3.0, 1.0])
        assert np.allclose(np.abs(vec), np.eye(2), atol=1e-12)

    def test_characteristic_polynomial(self):
        lam, _ = linalg.sym_eig([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(lam, [3.0, 1.0])

    def test_residual_random(self):
        s = rand(4, (8, 8))
        m = 0.5 * (s + s.T)
        lam, vec = linalg.sym_eig(m)
        norm2 = linalg.spectral_norm(m)
        assert np.linalg.norm(m @ vec - vec * lam) <= 1e-8 * norm2
        assert np.all(np.diff(lam) <= 1e-12)
        assert abs(lam.sum() - np.trace(m)) <= 1e-8 * abs(np.trace(m))
        assert np.linalg.norm(vec.T @ vec - np.eye(8)) <= 1e-8

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            linalg.sym_eig([[0.0, 1.0], [0.0, 0.0]])


def planar_pair(theta):
    q_true = np.array([[1.0], [0.0]])
    q_hat = np.array([[math.cos(theta)], [math.sin(theta)]])
    return q_true, q_hat


class TestSubspaceError:
    def test_identical(self):
        q = linalg.random_orthonormal(6, 2, 0)
        assert linalg.subspace_error(q, q) <= 1e-14

    def test_orthogonal_complement(self):
        q1 = np.eye(4)[:, :2]
        q2 = np.eye(4)[:, 2:]
        assert linalg.subspace_error(q1, q2) == pytest.approx(1.0)

    def test_plane_angle(self):
        q_true, q_hat = planar_pair(math.pi / 6)
        assert linalg.subspace_error(q_true, q_hat) == pytest.approx(0.25, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            linalg.subspace_error(np.eye(3)[:, :1], np.eye(4)[:, :1])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        q1 = linalg.random_orthonormal(7, 3, seed)
        q2 = linalg.random_orthonormal(7, 3, seed + 1)
        rot, _ = linalg.qr_factor(rng.standard_normal((3, 3)))
        base = linalg.subspace_error(q1, q2)
        assert abs(linalg.subspace_error(q1 @ rot, q2) - base) <= 1e-12
        assert abs(linalg.subspace_error(q1, q2 @ rot) - base) <= 1e-12

    def test_sign_flip_invariance(self):
        q1 = linalg.random_orthonormal(6, 3, 5)
        q2 = linalg.random_orthonormal(6, 3, 6)
        flipped = q2 * np.array([1.0, -1.0, -1.0])
        assert linalg.subspace_error(q1, flipped) == pytest.approx(
            linalg.subspace_error(q1, q2), abs=1e-14)


class TestProjectionDistance:
    def test_identical(self):
        q = linalg.random_orthonormal(5, 2, 1)
        assert linalg.projection_distance(q, q) <= 1e-12

    def test_plane_angle(self):
        q_true, q_hat = planar_pair(math.pi / 6)
        assert linalg.projection_distance(q_true, q_hat) == pytest.approx(0.5, abs=1e-12)

    def test_orthogonal_complement(self):
        q1 = np.eye(4)[:, :2]
        q2 = np.eye(4)[:, 2:]
        assert linalg.projection_distance(q1, q2) == pytest.approx(1.0)

    def test_matches_projector_difference(self):
        # independent route: explicit projector difference + spectral norm
        q1 = linalg.random_orthonormal(9, 3, 7)
        q2 = linalg.random_orthonormal(9, 3, 8)
        brute = linalg.spectral_norm(q1 @ q1.T - q2 @ q2.T)
        assert linalg.projection_distance(q1, q2) == pytest.approx(brute, abs=1e-10)

    def test_mean_vs_max_squared_sine(self):
        q1 = linalg.random_orthonormal(10, 4, 9)
        q2 = linalg.random_orthonormal(10, 4, 10)
        mean_sq = linalg.subspace_error(q1, q2)
        max_sq = linalg.projection_distance(q1, q2) ** 2
        assert mean_sq <= max_sq + 1e-12
        assert max_sq <= 4 * mean_sq + 1e-12


class TestSpectralNorm:
    def test_identity(self):
        assert linalg.spectral_norm(np.eye(3)) == pytest.approx(1.0)

    def test_diagonal_with_sign(self):
        assert linalg.spectral_norm(np.diag([2.0, -5.0])) == pytest.approx(5.0)

    def test_nilpotent(self):
        assert linalg.spectral_norm([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(1.0)

    def test_zero_matrix(self):
        assert linalg.spectral_norm(np.zeros((3, 2))) == 0.0


def test_random_orthonormal_deterministic():
    a = linalg.random_orthonormal(10, 3, 42)
    b = linalg.random_orthonormal(10, 3, 42)
    assert (a == b).all()
    assert np.linalg.norm(a.T @ a - np.eye(3)) <= 1e-10
