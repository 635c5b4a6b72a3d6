# sampling/tests/test_score.py
import json
import tempfile
import threading
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from sampling.exceptions import MixtureError
from sampling.schedule import make_vp_linear
from sampling.score import (
    CONSTANT_VALUE, ConstantScoreModel, GaussianMixture, ScoreModel, build_model, preset_mixture,
)


class GaussianMixtureTests(SimpleTestCase):
    def test_score_matches_finite_differences(self):
        mixture = preset_mixture('bimodal-2d')
        rng = np.random.default_rng(3)
        x = rng.normal(scale=2.0, size=(5, 2))
        step = 1e-5
        numeric = np.empty_like(x)
        for d in range(2):
            offset = np.zeros(2)
            offset[d] = step
            numeric[:, d] = (mixture.log_density(x + offset) - mixture.log_density(x - offset)) / (2 * step)
        np.testing.assert_allclose(mixture.score(x), numeric, rtol=1e-5, atol=1e-6)

    def test_single_gaussian_score(self):
        mixture = GaussianMixture([1.0], [[1.0, -1.0]], [np.diag([2.0, 0.5])])
        x = np.array([[0.0, 0.0], [3.0, 1.0]])
        expected = -(x - [1.0, -1.0]) / [2.0, 0.5]
        np.testing.assert_allclose(mixture.score(x), expected, rtol=1e-12)

    def test_far_tail_score_is_finite(self):
        mixture = preset_mixture('ring-8')
        score = mixture.score(np.array([[200.0, -150.0]]))
        self.assertTrue(np.all(np.isfinite(score)))

    def test_sample_moments(self):
        mixture = preset_mixture('bimodal-2d')
        draws = mixture.sample(20000, np.random.default_rng(0))
        # mean 0, per-coordinate variance 0.25 + 4
        self.assertLess(np.abs(draws.mean(axis=0)).max(), 0.05)
        np.testing.assert_allclose(draws.var(axis=0), 4.25, rtol=0.05)

    def test_validation(self):
        with self.assertRaises(MixtureError):
            GaussianMixture([0.5, 0.6], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
        with self.assertRaises(MixtureError):
            GaussianMixture([1.0], [[0.0, 0.0]], [[[1.0, 2.0], [2.0, 1.0]]])
        with self.assertRaises(MixtureError):
            GaussianMixture([1.0], [[0.0, 0.0]], [[[1.0, 0.5], [0.0, 1.0]]])
        with self.assertRaises(MixtureError):
            GaussianMixture([1.0], [[0.0, 0.0]], [np.eye(3)])

    def test_json_documents(self):
        with tempfile.TemporaryDirectory() as tmp:
            good = Path(tmp) / 'mixture.json'
            good.write_text(json.dumps(preset_mixture('gaussian-2d').as_dict()))
            loaded = GaussianMixture.from_json(good)
            np.testing.assert_array_equal(loaded.means, [[1.0, -0.5]])

            broken = Path(tmp) / 'broken.json'
            broken.write_text('{"weights": [1.0],\n "means": [[0, 0]]\n')
            with self.assertRaisesMessage(MixtureError, 'line'):
                GaussianMixture.from_json(broken)

            missing = Path(tmp) / 'missing.json'
            missing.write_text('{"weights": [1.0]}')
            with self.assertRaisesMessage(MixtureError, 'means'):
                GaussianMixture.from_json(missing)

    def test_unknown_preset(self):
        with self.assertRaises(MixtureError):
            preset_mixture('swiss-roll')


class ScoreModelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.sched = make_vp_linear()

    def test_eps_pred_is_scaled_score(self):
        model = build_model(self.sched, preset='bimodal-2d')
        x = np.random.default_rng(1).normal(size=(4, 2))
        np.testing.assert_allclose(
            model.eps_pred(x, 400), -self.sched.sigma(400) * model.score_at(x, 400), rtol=1e-14,
        )

    def test_marginal_is_forward_process(self):
        model = build_model(self.sched, preset='gaussian-2d')
        marginal = model.marginal_at(600)
        alpha, sigma = self.sched.alpha(600), self.sched.sigma(600)
        np.testing.assert_allclose(marginal.means[0], alpha * np.array([1.0, -0.5]))
        np.testing.assert_allclose(marginal.covariances[0], alpha ** 2 * np.diag([0.25, 0.5]) + sigma ** 2 * np.eye(2))

    def test_marginal_score_at_continuous_time(self):
        model = build_model(self.sched, preset='bimodal-2d')
        x = np.array([[0.3, -0.4]])
        self.assertTrue(np.all(np.isfinite(model.score_at(x, 123.4))))

    def test_call_counting(self):
        model = build_model(self.sched, preset='bimodal-2d')
        model.eps_pred(np.zeros((5, 2)), 10)
        model.eps_pred(np.zeros(2), 10)
        self.assertEqual(model.call_count, 6)
        self.assertEqual(model.batch_count, 2)
        model.reset()
        self.assertEqual(model.call_count, 0)

    def test_threaded_counting(self):
        model = build_model(self.sched, preset='bimodal-2d')

        def work():
            for _ in range(50):
                model.eps_pred(np.ones((3, 2)), 500)

        threads = [threading.Thread(target=work) for _ in range(8)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        self.assertEqual(model.call_count, 8 * 50 * 3)
        self.assertEqual(model.batch_count, 400)

    def test_constant_model(self):
        model = build_model(self.sched, preset='constant')
        self.assertIsInstance(model, ConstantScoreModel)
        eps = model.eps_pred(np.zeros((3, 2)), 700)
        np.testing.assert_array_equal(eps, np.tile(CONSTANT_VALUE, (3, 1)))
        self.assertEqual(model.call_count, 3)

    def test_batch_rows_are_independent(self):
        model = build_model(self.sched, preset='ring-8')
        x = np.random.default_rng(2).normal(size=(7, 2))
        whole = model.eps_pred(x, 250)
        parts = np.concatenate([model.eps_pred(x[:3], 250), model.eps_pred(x[3:], 250)])
        np.testing.assert_array_equal(whole, parts)

    def test_analytic_flow_identity_and_std_normal(self):
        gaussian = build_model(self.sched, preset='gaussian-2d')
        x = np.random.default_rng(4).normal(size=(6, 2))
        np.testing.assert_allclose(gaussian.analytic_flow(x, 300, 300), x, rtol=1e-12)

        # N(0, I) data keeps every marginal at N(0, I), so the flow is the identity
        normal = build_model(self.sched, preset='std-normal-2d')
        np.testing.assert_allclose(normal.analytic_flow(x, 999, 0), x, rtol=1e-12)

    def test_analytic_flow_needs_one_component(self):
        model = ScoreModel(preset_mixture('bimodal-2d'), self.sched)
        with self.assertRaises(MixtureError):
            model.analytic_flow(np.zeros((1, 2)), 999, 0)
