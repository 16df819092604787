import math

import numpy as np
import pytest

from align import align_series, jacobi_svd, procrustes, shared_rows
from config import AlignConfig
from errors import DimMismatch, EmptyIntersection, PeriodGap
from settings import BASE_SEED, ORTHO_TOL
from utilities.builders import make_model, make_vocab


def _random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def _rotation_2d(theta):
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def _model(period, surfaces, matrix, counts=None):
    return make_model(period, dict(zip(surfaces, matrix.tolist())), counts=counts)


class TestJacobiSvd:
    @pytest.mark.parametrize("d", [1, 2, 5, 20])
    def test_matches_numpy(self, d):
        m = np.random.default_rng(BASE_SEED + d).normal(size=(d, d))
        u, sigma, v, deficient = jacobi_svd(m)
        assert not deficient
        np.testing.assert_allclose(sigma, np.linalg.svd(m, compute_uv=False), rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(u @ np.diag(sigma) @ v.T, m, atol=1e-9)
        np.testing.assert_allclose(u.T @ u, np.eye(d), atol=ORTHO_TOL)
        np.testing.assert_allclose(v.T @ v, np.eye(d), atol=ORTHO_TOL)

    def test_descending_order(self):
        _, sigma, _, _ = jacobi_svd(np.diag([1.0, 3.0, 2.0]))
        assert sigma.tolist() == [3.0, 2.0, 1.0]

    def test_rank_deficient_completion(self):
        m = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 0.0]])
        u, sigma, v, deficient = jacobi_svd(m)
        assert deficient
        np.testing.assert_allclose(u.T @ u, np.eye(3), atol=ORTHO_TOL)
        np.testing.assert_allclose(u @ np.diag(sigma) @ v.T, m, atol=1e-9)

    def test_zero_matrix(self):
        u, sigma, v, deficient = jacobi_svd(np.zeros((3, 3)))
        assert deficient
        assert np.all(sigma == 0.0)
        np.testing.assert_allclose(u @ v.T, np.eye(3), atol=ORTHO_TOL)

    def test_non_square(self):
        with pytest.raises(DimMismatch):
            jacobi_svd(np.zeros((2, 3)))


class TestProcrustes:
    def test_residual_matches_brute_force(self):
        angles = np.radians(np.arange(3600) / 10)
        candidates = [_rotation_2d(a) for a in angles]
        candidates += [r @ np.diag([1.0, -1.0]) for r in candidates]
        for seed in range(50):
            rng = np.random.default_rng(seed)
            source, target = rng.normal(size=(10, 2)), rng.normal(size=(10, 2))
            brute = min(np.linalg.norm(source @ q.T - target) for q in candidates)
            assert procrustes(source, target).residual <= brute + 1e-6

    def test_residual_beats_random_orthogonal_maps(self):
        rng = np.random.default_rng(BASE_SEED)
        source, target = rng.normal(size=(30, 6)), rng.normal(size=(30, 6))
        residual = procrustes(source, target).residual
        for _ in range(100):
            q = _random_orthogonal(rng, 6)
            assert residual <= np.linalg.norm(source @ q.T - target) + 1e-9

    @pytest.mark.parametrize("seed", range(20))
    def test_never_worse_than_identity(self, seed):
        rng = np.random.default_rng(seed)
        source = rng.normal(size=(12, 4))
        target = source + rng.normal(scale=0.5, size=(12, 4))
        assert procrustes(source, target).residual <= np.linalg.norm(source - target) + 1e-9

    def test_recovers_planar_rotations(self):
        source = np.random.default_rng(BASE_SEED).normal(size=(6, 2))
        for step in range(3600):
            r = _rotation_2d(math.radians(step / 10))
            rotation = procrustes(source, source @ r.T)
            np.testing.assert_allclose(rotation.matrix, r, atol=1e-9)

    def test_recovers_reflections(self):
        source = np.random.default_rng(BASE_SEED).normal(size=(6, 2))
        for step in range(0, 3600, 10):
            theta = math.radians(step / 10)
            f = np.array([[math.cos(theta), math.sin(theta)], [math.sin(theta), -math.cos(theta)]])
            rotation = procrustes(source, source @ f.T)
            np.testing.assert_allclose(rotation.matrix, f, atol=1e-9)

    @pytest.mark.parametrize("d", [2, 10, 100])
    def test_recovers_random_rotation(self, d):
        rng = np.random.default_rng(BASE_SEED + d)
        r = _random_orthogonal(rng, d)
        source = rng.normal(size=(3 * d, d))
        rotation = procrustes(source, source @ r.T)
        np.testing.assert_allclose(rotation.matrix, r, atol=1e-8)
        np.testing.assert_allclose(rotation.matrix.T @ rotation.matrix, np.eye(d), atol=ORTHO_TOL)
        assert rotation.residual < 1e-8
        assert not rotation.rank_deficient

    def test_noisy_target_still_orthogonal(self):
        rng = np.random.default_rng(BASE_SEED)
        source = rng.normal(size=(40, 5))
        target = source @ _random_orthogonal(rng, 5).T + rng.normal(scale=0.1, size=(40, 5))
        rotation = procrustes(source, target)
        np.testing.assert_allclose(rotation.matrix @ rotation.matrix.T, np.eye(5), atol=ORTHO_TOL)
        assert rotation.residual > 0.0

    def test_cosines_are_preserved(self):
        rng = np.random.default_rng(BASE_SEED)
        source = rng.normal(size=(50, 4))
        rotation = procrustes(source, rng.normal(size=(50, 4)))
        moved = source @ rotation.matrix.T

        def cosines(x):
            unit = x / np.linalg.norm(x, axis=1, keepdims=True)
            return unit @ unit.T

        np.testing.assert_allclose(cosines(moved), cosines(source), atol=1e-6)

    def test_rank_deficient_identity(self):
        source = np.array([[1.0, 0.0], [2.0, 0.0]])
        rotation = procrustes(source, source)
        assert rotation.rank_deficient
        np.testing.assert_allclose(rotation.matrix, np.eye(2), atol=1e-12)
        assert rotation.residual == pytest.approx(0.0, abs=1e-12)

    def test_shape_errors(self):
        with pytest.raises(DimMismatch):
            procrustes(np.zeros((3, 2)), np.zeros((3, 3)))
        with pytest.raises(DimMismatch):
            procrustes(np.zeros((0, 2)), np.zeros((0, 2)))


class TestSharedRows:
    def test_sorted_by_surface(self):
        a = make_vocab({"zeta": 1, "alpha": 1, "CITE:pmid:1": 1})
        b = make_vocab({"alpha": 1, "CITE:pmid:1": 1, "zeta": 1, "other": 1})
        assert shared_rows(a, b) == [(2, 1), (1, 0), (0, 2)]

    def test_min_count(self):
        a = make_vocab({"x": 5, "y": 1})
        b = make_vocab({"x": 3, "y": 9})
        assert shared_rows(a, b, min_count=3) == [(0, 0)]

    def test_disjoint(self):
        with pytest.raises(EmptyIntersection) as info:
            shared_rows(make_vocab({"a": 1}), make_vocab({"b": 1}))
        assert info.value.pair is None


class TestAlignSeries:
    SURFACES = [f"w{i}" for i in range(8)]

    def test_two_periods_exact_recovery(self):
        rng = np.random.default_rng(BASE_SEED)
        x = rng.normal(size=(8, 3))
        r = _random_orthogonal(rng, 3)
        shift = np.array([0.5, -1.0, 2.0])
        series = align_series([
            _model(2010, self.SURFACES, x),
            _model(2011, self.SURFACES, x @ r.T + shift),
        ])
        assert series.periods == [2010, 2011]
        np.testing.assert_allclose(series.models[0].input_vectors, x @ r.T + shift, atol=1e-8)
        np.testing.assert_allclose(series.rotations[0].matrix, r, atol=1e-8)
        np.testing.assert_array_equal(series.rotations[1].matrix, np.eye(3))

    def test_partial_overlap(self):
        rng = np.random.default_rng(BASE_SEED)
        r = _random_orthogonal(rng, 3)
        first = [f"w{i}" for i in range(10)]
        second = [f"w{i}" for i in range(4, 14)]
        x = rng.normal(size=(10, 3))
        y = np.vstack([x[4:] @ r.T, rng.normal(size=(4, 3))])

        series = align_series([_model(2010, first, x), _model(2011, second, y)], AlignConfig(center=False))
        np.testing.assert_allclose(series.rotations[0].matrix, r, atol=1e-8)
        np.testing.assert_allclose(series.models[0].input_vectors, x @ r.T, atol=1e-8)

    def test_chains_into_last_frame(self):
        rng = np.random.default_rng(BASE_SEED)
        x = rng.normal(size=(8, 3))
        a, b = _random_orthogonal(rng, 3), _random_orthogonal(rng, 3)
        series = align_series([
            _model(2010, self.SURFACES, x),
            _model(2011, self.SURFACES, x @ a.T),
            _model(2012, self.SURFACES, x @ b.T),
        ])
        for model in series.models:
            np.testing.assert_allclose(model.input_vectors, x @ b.T, atol=1e-8)
            assert model.aligned
            assert model.frame_period == 2012
            assert model.output_vectors is None

    def test_duplicate_periods_are_unchanged(self):
        x = np.random.default_rng(BASE_SEED).normal(size=(8, 3))
        series = align_series([_model(2010, self.SURFACES, x), _model(2011, self.SURFACES, x)])
        np.testing.assert_allclose(series.models[0].input_vectors, x, atol=1e-8)

    def test_inputs_are_not_modified(self):
        rng = np.random.default_rng(BASE_SEED)
        x = rng.normal(size=(8, 3))
        source = _model(2010, self.SURFACES, x)
        align_series([source, _model(2011, self.SURFACES, x @ _random_orthogonal(rng, 3).T)])
        np.testing.assert_array_equal(source.input_vectors, x)
        assert not source.aligned

    def test_no_shared_tokens_names_the_pair(self):
        x = np.eye(3)
        with pytest.raises(EmptyIntersection) as info:
            align_series([
                _model(2010, ["a", "b", "c"], x),
                _model(2011, ["d", "e", "f"], x),
            ])
        assert info.value.pair == (2010, 2011)
        assert "2010" in str(info.value) and "2011" in str(info.value)

    def test_period_gap(self):
        x = np.eye(3)
        with pytest.raises(PeriodGap) as info:
            align_series([_model(2010, ["a", "b", "c"], x), _model(2012, ["a", "b", "c"], x)])
        assert "2010" in str(info.value) and "2012" in str(info.value)

    def test_single_period(self):
        with pytest.raises(PeriodGap):
            align_series([_model(2010, ["a", "b", "c"], np.eye(3))])

    def test_dimension_mismatch(self):
        with pytest.raises(DimMismatch):
            align_series([
                _model(2010, ["a", "b", "c"], np.eye(3)),
                _model(2011, ["a", "b", "c"], np.ones((3, 2))),
            ])
