# sampling/tests/test_pfdiff.py
import numpy as np
from django.test import SimpleTestCase

from sampling.exceptions import ConfigInvariantError, StaleBufferError
from sampling.pfdiff import (
    PFDiffConfig, auto_search_kh, future_only_anchors, future_update, pfdiff_sample, pfdiff_variant,
    springboard_step,
)
from sampling.records import ScoreBuffer
from sampling.schedule import make_grid, make_vp_linear
from sampling.score import build_model
from sampling.solvers import SolverStep, baseline_sample, reference_solve, seed_chains

KH_PAIRS = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]


def endpoint_error(x_0, target):
    return float(np.mean(np.sum((x_0 - target) ** 2, axis=1)))


class PFDiffConfigTests(SimpleTestCase):
    def test_grid_size_law(self):
        for k, h in KH_PAIRS:
            config = PFDiffConfig(k=k, h=h, N=10)
            self.assertEqual(config.grid_size, (k + 1) * 10 - k)
        self.assertEqual(PFDiffConfig(k=1, h=1, p=2, N=4).grid_size, 6)

    def test_label_and_manifest(self):
        config = PFDiffConfig(k=2, h=1, N=6)
        self.assertEqual(config.label, 'PFDiff-2_1')
        self.assertEqual(config.as_manifest(), {'k': 2, 'h': 1, 'p': 1, 'N': 6, 'mode': 'full', 'eta': 0.0})

    def test_invalid_configs(self):
        bad = [
            {'k': 4, 'h': 1},
            {'k': 1, 'h': 2},
            {'k': 1, 'h': 0},
            {'p': 2, 'N': 5},
            {'p': 2, 'N': 4, 'mode': 'future-only'},
            {'mode': 'sideways'},
            {'N': 1},
            {'eta': 1.5},
        ]
        for kwargs in bad:
            with self.subTest(**kwargs), self.assertRaises(ConfigInvariantError):
                PFDiffConfig(**kwargs)


class BufferTagTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.sched = make_vp_linear()
        cls.phi = SolverStep(cls.sched)

    def test_springboard_rejects_stale_buffer(self):
        stale = ScoreBuffer((np.zeros((1, 2)),), 999, 899)
        with self.assertRaises(StaleBufferError):
            springboard_step(self.phi, stale, np.zeros((1, 2)), 799, 699, expected=(899, 799), strict=True)

    def test_lenient_mode_warns(self):
        stale = ScoreBuffer((np.zeros((1, 2)),), 999, 899)
        with self.assertLogs('sampling.pfdiff', 'WARNING'):
            springboard_step(self.phi, stale, np.zeros((1, 2)), 799, 699, expected=(899, 799), strict=False)

    def test_empty_buffer(self):
        with self.assertRaises(StaleBufferError):
            springboard_step(self.phi, None, np.zeros((1, 2)), 799, 699, strict=True)

    def test_future_buffer_must_cover_the_jump(self):
        future = ScoreBuffer((np.zeros((1, 2)),), 700, 600)
        with self.assertRaises(StaleBufferError):
            future_update(self.phi, future, np.zeros((1, 2)), np.zeros((1, 2)), 799, 699, 599, strict=True)

    def test_buffer_interval_must_descend(self):
        with self.assertRaises(StaleBufferError):
            ScoreBuffer((np.zeros(2),), 500, 600)
        with self.assertRaises(StaleBufferError):
            ScoreBuffer((), 600, 500)


class NFEAccountingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.sched = make_vp_linear()
        cls.model = build_model(cls.sched, preset='bimodal-2d')
        cls.x_T, _, _ = seed_chains(0, 3, 2)

    def test_first_order_budget(self):
        for k, h in KH_PAIRS:
            for N in (4, 6, 10, 20):
                with self.subTest(k=k, h=h, N=N):
                    config = PFDiffConfig(k=k, h=h, N=N)
                    grid = config.make_grid('uniform', self.sched.T)
                    self.assertEqual(len(grid), (k + 1) * N - k + 1)
                    self.model.reset()
                    result = pfdiff_sample(config, SolverStep(self.sched), self.model, self.sched, grid, self.x_T,
                                           strict=True)
                    self.assertEqual(result.nfe_batches, N)
                    self.assertEqual(result.nfe_evals, N)
                    self.assertEqual(self.model.call_count, 3 * N)
                    self.assertEqual(result.trajectory.times[-1], 0)

    def test_higher_order_budget(self):
        for p, N in ((2, 4), (2, 8), (3, 6)):
            with self.subTest(p=p, N=N):
                config = PFDiffConfig(k=1, h=1, p=p, N=N)
                phi = SolverStep(self.sched, 'dpm-solver', p)
                self.model.reset()
                result = pfdiff_sample(config, phi, self.model, self.sched, config.make_grid('uniform', 1000),
                                       self.x_T, strict=True)
                self.assertEqual(result.nfe_batches, N // p)
                self.assertEqual(result.nfe_evals, N)
                self.assertEqual(self.model.call_count, 3 * N)

    def test_ablation_budgets(self):
        for mode in ('past-only', 'future-only'):
            for N in (4, 5, 10):
                with self.subTest(mode=mode, N=N):
                    config = PFDiffConfig(k=2, h=1, N=N, mode=mode)
                    self.model.reset()
                    result = pfdiff_variant(config, SolverStep(self.sched), self.model, self.sched,
                                            config.make_grid('uniform', 1000), self.x_T, strict=True)
                    self.assertEqual(result.nfe_batches, N)
                    self.assertEqual(self.model.call_count, 3 * N)

    def test_variant_rejects_full_mode(self):
        config = PFDiffConfig()
        with self.assertRaises(ConfigInvariantError):
            pfdiff_variant(config, SolverStep(self.sched), self.model, self.sched,
                           config.make_grid('uniform', 1000), self.x_T)

    def test_future_only_plan(self):
        lead, plan = future_only_anchors(PFDiffConfig(k=1, h=1, N=5, mode='future-only'))
        self.assertTrue(lead)
        self.assertEqual(len(plan), 2)
        self.assertEqual(plan[0][0], 1)
        self.assertEqual(plan[-1][2], PFDiffConfig(k=1, h=1, N=5).grid_size)
        for a, look, b in plan:
            self.assertLess(a, look)
            self.assertLess(look, b)

    def test_grid_and_solver_must_match(self):
        config = PFDiffConfig(k=1, h=1, N=4)
        with self.assertRaises(ConfigInvariantError):
            pfdiff_sample(config, SolverStep(self.sched), self.model, self.sched,
                          make_grid('uniform', 8, 1000), self.x_T)
        with self.assertRaises(ConfigInvariantError):
            pfdiff_sample(config, SolverStep(self.sched, 'dpm-solver', 2), self.model, self.sched,
                          config.make_grid('uniform', 1000), self.x_T)
        with self.assertRaises(ConfigInvariantError):
            pfdiff_sample(config, SolverStep(self.sched, eta=1.0), self.model, self.sched,
                          config.make_grid('uniform', 1000), self.x_T)


class ConstantScoreTests(SimpleTestCase):
    """With eps(x, t) = c every skip is exact: x/alpha telescopes"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.sched = make_vp_linear()
        cls.model = build_model(cls.sched, preset='constant')
        cls.x_T, _, _ = seed_chains(2, 6, 2)
        s = cls.sched
        y = cls.x_T / s.alpha(999) + (s.sigma(0) / s.alpha(0) - s.sigma(999) / s.alpha(999)) * cls.model.value
        cls.exact = s.alpha(0) * y

    def assertExact(self, x_0, rtol=1e-13):
        """Agreement relative to the largest endpoint coordinate"""
        np.testing.assert_allclose(x_0, self.exact, rtol=0, atol=rtol * np.abs(self.exact).max())

    def test_every_index_ddim(self):
        # 999 steps accumulate more rounding than one skip run
        result = baseline_sample(SolverStep(self.sched), self.model, make_grid('uniform', 999, 1000), self.x_T)
        self.assertExact(result.x_0, rtol=1e-12)

    def test_every_first_order_configuration(self):
        for k, h in KH_PAIRS:
            for mode in ('full', 'past-only', 'future-only'):
                for kind in ('uniform', 'quadratic'):
                    with self.subTest(k=k, h=h, mode=mode, kind=kind):
                        config = PFDiffConfig(k=k, h=h, N=6, mode=mode)
                        result = pfdiff_sample(config, SolverStep(self.sched), self.model, self.sched,
                                               config.make_grid(kind, 1000), self.x_T, strict=True)
                        self.assertExact(result.x_0)

    def test_higher_orders(self):
        for p in (2, 3):
            for mode in ('full', 'past-only'):
                with self.subTest(p=p, mode=mode):
                    config = PFDiffConfig(k=2, h=1, p=p, N=6, mode=mode)
                    result = pfdiff_sample(config, SolverStep(self.sched, 'dpm-solver', p), self.model, self.sched,
                                           config.make_grid('uniform', 1000), self.x_T, strict=True)
                    self.assertExact(result.x_0)


class AutoSearchTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.sched = make_vp_linear()

    def test_single_candidate(self):
        model = build_model(self.sched, preset='bimodal-2d')
        report = auto_search_kh([(2, 2)], model, self.sched, N=6, warmup=32)
        self.assertEqual(report.choice, (2, 2))
        self.assertFalse(report.tie_broken)

    def test_constant_scores_tie_to_smallest(self):
        model = build_model(self.sched, preset='constant')
        report = auto_search_kh([(3, 2), (2, 1), (1, 1)], model, self.sched, N=6, warmup=32)
        self.assertEqual(report.choice, (1, 1))
        self.assertTrue(report.tie_broken)

    def test_matches_independent_argmin(self):
        model = build_model(self.sched, preset='bimodal-2d')
        candidates = [(1, 1), (2, 1), (2, 2)]
        report = auto_search_kh(candidates, model, self.sched, N=6, warmup=64, seed=3)

        x_T, _, _ = seed_chains(3, 64, 2)
        target = reference_solve(model, self.sched, x_T, record=[0]).meta['endpoint']
        errors = {}
        for k, h in candidates:
            config = PFDiffConfig(k=k, h=h, N=6)
            result = pfdiff_sample(config, SolverStep(self.sched), model, self.sched,
                                   config.make_grid('uniform', 1000), x_T)
            errors[(k, h)] = endpoint_error(result.x_0, target)
        self.assertEqual(report.choice, min(errors, key=errors.get))
        for row in report.rows:
            self.assertAlmostEqual(row['mean'], errors[(row['k'], row['h'])], places=12)

    def test_empty_candidates(self):
        model = build_model(self.sched, preset='bimodal-2d')
        with self.assertRaises(ConfigInvariantError):
            auto_search_kh([], model, self.sched, N=6)
