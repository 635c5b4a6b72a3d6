# sampling/tests/test_metrics.py
import numpy as np
from django.test import SimpleTestCase

from sampling.exceptions import MetricError, PairingError
from sampling.metrics import (
    SampleSet, endpoint_mse, gaussian_w2, metric_summary, random_directions, sliced_wasserstein,
)
from sampling.schedule import make_grid, make_vp_linear
from sampling.score import build_model
from sampling.solvers import SolverStep, baseline_sample, seed_chains


def psd_sqrt(matrix):
    values, vectors = np.linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def random_spd(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + 0.1 * np.eye(dim)


class GaussianW2Tests(SimpleTestCase):
    def test_identical_inputs(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        self.assertEqual(gaussian_w2([1.0, 2.0], cov, [1.0, 2.0], cov), 0.0)
        wide = random_spd(np.random.default_rng(3), 6)
        self.assertEqual(gaussian_w2(np.ones(6), wide, np.ones(6), wide.copy()), 0.0)

    def test_mean_shift_in_one_dimension(self):
        self.assertAlmostEqual(gaussian_w2([0.0], [[1.0]], [1.0], [[1.0]]), 1.0, places=12)

    def test_matches_eigendecomposition_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m1, m2 = rng.normal(size=2), rng.normal(size=2)
            c1, c2 = random_spd(rng, 2), random_spd(rng, 2)
            root2 = psd_sqrt(c2)
            cross = psd_sqrt(root2 @ c1 @ root2)
            expected = np.sqrt(np.sum((m1 - m2) ** 2) + np.trace(c1 + c2 - 2 * cross))
            self.assertAlmostEqual(gaussian_w2(m1, c1, m2, c2), expected, delta=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(8)
        c1, c2 = random_spd(rng, 3), random_spd(rng, 3)
        m1, m2 = rng.normal(size=3), rng.normal(size=3)
        self.assertAlmostEqual(gaussian_w2(m1, c1, m2, c2), gaussian_w2(m2, c2, m1, c1), delta=1e-9)

    def test_rejects_non_psd(self):
        with self.assertRaises(MetricError):
            gaussian_w2([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0], np.eye(2))
        with self.assertRaises(MetricError):
            gaussian_w2([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0], np.eye(2))
        with self.assertRaises(MetricError):
            gaussian_w2([0.0], [[1.0]], [0.0, 0.0], np.eye(2))


class SlicedWassersteinTests(SimpleTestCase):
    def test_same_set_is_zero(self):
        points = np.random.default_rng(0).normal(size=(50, 3))
        self.assertEqual(sliced_wasserstein(points, points, n_proj=16, seed=1), 0.0)

    def test_one_dimensional_collapse(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=40), rng.normal(loc=0.5, size=40)
        expected = np.sqrt(np.mean((np.sort(a) - np.sort(b)) ** 2))
        self.assertAlmostEqual(sliced_wasserstein(a, b, directions=[[1.0]]), expected, places=12)

    def test_permutation_invariant_and_symmetric(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(60, 2)), rng.normal(size=(60, 2)) + 1.0
        value = sliced_wasserstein(a, b, n_proj=32, seed=4)
        self.assertAlmostEqual(sliced_wasserstein(a[::-1], b, n_proj=32, seed=4), value, places=12)
        self.assertAlmostEqual(sliced_wasserstein(b, a, n_proj=32, seed=4), value, places=12)
        self.assertGreater(value, 0.0)

    def test_rotation_invariant(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(80, 3)), rng.normal(size=(80, 3)) * 2.0
        rotation, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        directions = random_directions(3, 24, seed=5)
        rotated = sliced_wasserstein(a @ rotation.T, b @ rotation.T, directions=directions @ rotation.T)
        self.assertAlmostEqual(rotated, sliced_wasserstein(a, b, directions=directions), delta=1e-9)

    def test_unequal_sizes(self):
        rng = np.random.default_rng(4)
        value = sliced_wasserstein(rng.normal(size=(100, 2)), rng.normal(size=(50, 2)), n_proj=8)
        self.assertGreaterEqual(value, 0.0)

    def test_errors(self):
        with self.assertRaises(MetricError):
            sliced_wasserstein(np.zeros((0, 2)), np.zeros((3, 2)))
        with self.assertRaises(MetricError):
            sliced_wasserstein(np.zeros((3, 2)), np.zeros((3, 3)))
        with self.assertRaises(MetricError):
            random_directions(2, 0, seed=0)

    def test_directions_are_unit(self):
        directions = random_directions(5, 10, seed=0)
        np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)


class EndpointMseTests(SimpleTestCase):
    def test_identical_sets(self):
        points = np.random.default_rng(0).normal(size=(10, 2))
        self.assertEqual(endpoint_mse(SampleSet(points), SampleSet(points)), (0.0, 0.0))

    def test_unit_offset(self):
        self.assertEqual(endpoint_mse(SampleSet([[0.0, 0.0]]), SampleSet([[1.0, 0.0]])), (1.0, 0.0))

    def test_pairs_by_chain_id(self):
        points = np.arange(8.0).reshape(4, 2)
        shuffled = SampleSet(points[::-1], chain_ids=[3, 2, 1, 0])
        self.assertEqual(endpoint_mse(SampleSet(points), shuffled), (0.0, 0.0))

    def test_pairing_mismatch(self):
        with self.assertRaises(PairingError):
            endpoint_mse(SampleSet(np.zeros((3, 2))), SampleSet(np.zeros((3, 2)), chain_ids=[0, 1, 5]))

    def test_non_finite_points(self):
        with self.assertRaises(MetricError):
            SampleSet([[np.nan, 0.0]])

    def test_ddim_self_convergence_on_std_normal(self):
        sched = make_vp_linear()
        model = build_model(sched, preset='std-normal-2d')
        x_T, _, ids = seed_chains(0, 64, 2)
        phi = SolverStep(sched)
        fine = baseline_sample(phi, model, make_grid('uniform', 999, 1000), x_T)
        coarse = baseline_sample(phi, model, make_grid('uniform', 500, 1000), x_T)
        mean, _ = endpoint_mse(SampleSet(fine.x_0, ids), SampleSet(coarse.x_0, ids))
        self.assertLess(mean, 1e-4)

    def test_summary_shape(self):
        self.assertEqual(
            metric_summary('sw', 0.25, 100, n_proj=128, seed=0),
            {'metric': 'sw', 'value': 0.25, 'n': 100, 'n_proj': 128, 'seed': 0},
        )
