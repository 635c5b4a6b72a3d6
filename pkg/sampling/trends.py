# sampling/trends.py
"""
Pre-registered trend runs.

Each trend is a seeded, fixed-size run that reduces to a flat
{label: value} table. `manage.py pin_fixtures` records the tables as JSON
under sampling/tests/fixtures/; the test suite recomputes every run,
checks it against the pinned numbers within FIXTURE_RTOL and asserts the
orderings on the pinned values.
"""
import json
import logging
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import load_experiment
from .diagnostics import TABLE_COLUMNS, eta_sweep, mse_vs_dt, springboard_vs_future
from .exceptions import FixtureError
from .metrics import sliced_wasserstein
from .pfdiff import PFDiffConfig, pfdiff_sample
from .runner import RunWriter
from .schedule import make_grid, make_vp_linear
from .score import build_model, preset_mixture
from .solvers import SolverStep, baseline_sample, reference_solve, seed_chains

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent / 'tests' / 'fixtures'
SPRINGBOARD_CONFIG = FIXTURE_DIR / 'springboard.toml'
SPRINGBOARD_TABLE = 'springboard.csv'

TREND_SEED = 0
FIXTURE_RTOL = 0.05
SW_PROJECTIONS = 128
ENDPOINT_BUDGETS = (6, 8, 10, 20)


def _endpoint_error(x_0, target):
    return float(np.mean(np.sum((x_0 - target) ** 2, axis=1)))


@lru_cache(maxsize=4)
def _bench(preset, chains, seed):
    """Schedule, model, seeded starts and the every-index endpoint they flow to"""
    sched = make_vp_linear()
    model = build_model(sched, preset=preset)
    x_T, _, chain_ids = seed_chains(seed, chains, model.dim)
    target = reference_solve(model, sched, x_T, record=[0], chain_ids=chain_ids).meta['endpoint']
    return sched, model, x_T, chain_ids, target


def _pfdiff_endpoint(bench, **kwargs):
    sched, model, x_T, chain_ids, _ = bench
    config = PFDiffConfig(**kwargs)
    result = pfdiff_sample(config, SolverStep(sched), model, sched, config.make_grid('uniform', sched.T), x_T,
                           chain_ids=chain_ids, strict=True)
    return result.x_0


def _ddim_endpoint(bench, N):
    sched, model, x_T, chain_ids, _ = bench
    return baseline_sample(SolverStep(sched), model, make_grid('uniform', N, sched.T), x_T, chain_ids=chain_ids).x_0


def endpoint_trend(chains, seed):
    """bimodal-2d: PFDiff-2_1 against DDIM at equal NFE"""
    bench = _bench('bimodal-2d', chains, seed)
    target = bench[-1]
    values = {}
    for N in ENDPOINT_BUDGETS:
        values[f"PFDiff-2_1 N={N}"] = _endpoint_error(_pfdiff_endpoint(bench, k=2, h=1, N=N), target)
        values[f"DDIM N={N}"] = _endpoint_error(_ddim_endpoint(bench, N), target)
    return values


def std_normal_trend(chains, seed):
    """std-normal-2d: PFDiff-1_1 against DDIM at N = 10"""
    bench = _bench('std-normal-2d', chains, seed)
    target = bench[-1]
    return {
        'PFDiff-1_1 N=10': _endpoint_error(_pfdiff_endpoint(bench, k=1, h=1, N=10), target),
        'DDIM N=10': _endpoint_error(_ddim_endpoint(bench, 10), target),
    }


def ablation_trend(chains, seed):
    """bimodal-2d, k = h = 1, N = 8: full driver against each half of it"""
    bench = _bench('bimodal-2d', chains, seed)
    target = bench[-1]
    return {
        mode: _endpoint_error(_pfdiff_endpoint(bench, k=1, h=1, N=8, mode=mode), target)
        for mode in ('full', 'past-only', 'future-only')
    }


def eta_trend(chains, seed):
    """bimodal-2d, N = 6: deterministic against fully stochastic steps"""
    sched = make_vp_linear()
    model = build_model(sched, preset='bimodal-2d')
    rows = eta_sweep(model, sched, [6], [0.0, 1.0], config=PFDiffConfig(k=1, h=1), n_chains=chains, seed=seed)
    values = {}
    for row in rows:
        values[f"PFDiff eta={row['eta']:g}"] = row['pfdiff_mse']
        values[f"DDIM eta={row['eta']:g}"] = row['baseline_mse']
    return values


def sliced_trend(chains, seed):
    """bimodal-2d, N = 10: sliced Wasserstein of each sampler against exact draws from q_0"""
    bench = _bench('bimodal-2d', chains, seed)
    truth = preset_mixture('bimodal-2d').sample(chains, np.random.default_rng([seed, 1]))
    endpoints = {
        'PFDiff-1_1': _pfdiff_endpoint(bench, k=1, h=1, N=10),
        'PFDiff-2_1': _pfdiff_endpoint(bench, k=2, h=1, N=10),
        'DDIM': _ddim_endpoint(bench, 10),
    }
    return {
        label: sliced_wasserstein(x_0, truth, n_proj=SW_PROJECTIONS, seed=seed)
        for label, x_0 in endpoints.items()
    }


def score_gap_trend(chains, seed):
    """bimodal-2d: score drift at growing time gaps"""
    sched = make_vp_linear()
    model = build_model(sched, preset='bimodal-2d')
    return {f"dt={row['dt']}": row['mse'] for row in mse_vs_dt(model, sched, chains, [1, 100, 900], seed=seed)}


# name -> (run, chains)
TRENDS = {
    'endpoint-mse': (endpoint_trend, 10000),
    'std-normal-endpoint': (std_normal_trend, 10000),
    'ablation': (ablation_trend, 10000),
    'eta-sweep': (eta_trend, 10000),
    'sliced-wasserstein': (sliced_trend, 10000),
    'score-gap': (score_gap_trend, 256),
}


def run_trend(name, seed=TREND_SEED):
    try:
        run, chains = TRENDS[name]
    except KeyError:
        raise FixtureError(f"Unknown trend {name!r}; choose from {', '.join(TRENDS)}") from None
    logger.info('Running trend %s over %d chains (seed %d)', name, chains, seed)
    return {'name': name, 'chains': chains, 'seed': seed, 'values': run(chains, seed)}


def fixture_path(name, directory=None):
    return Path(directory or FIXTURE_DIR) / f"{name}.json"


def write_fixture(payload, directory=None):
    path = fixture_path(payload['name'], directory)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n')
    logger.info('Pinned %s', path)
    return path


def load_fixture(name, directory=None):
    """Pinned payload, or None when the trend was never pinned"""
    path = fixture_path(name, directory)
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{path}: {exc}") from exc


def within_tolerance(live, pinned, rtol=FIXTURE_RTOL):
    return abs(live - pinned) <= rtol * abs(pinned)


def springboard_rows(config_path=SPRINGBOARD_CONFIG):
    """The springboard table for the pinned config, as `diagnose springboard` computes it"""
    experiment = load_experiment(config_path)
    return springboard_vs_future(experiment.model, experiment.schedule, experiment.pfdiff, experiment.chains,
                                 seed=experiment.seed, grid_kind=experiment.grid.kind, phi=experiment.phi)


def pin_springboard(directory=None):
    writer = RunWriter(directory or FIXTURE_DIR)
    path = writer.write_csv(SPRINGBOARD_TABLE, 'springboard', TABLE_COLUMNS['springboard'], springboard_rows())
    logger.info('Pinned %s', path)
    return path
