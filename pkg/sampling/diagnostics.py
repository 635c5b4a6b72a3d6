# sampling/diagnostics.py
"""
Desk-scale error analysis: score similarity across time gaps, springboard
versus future-score reliability, accumulated truncation error, the
higher-order coefficient inequality behind the foresight update, trajectory
planarity, the eta sweep and solver convergence order.

Every table is a list of flat dicts so the runner can write it as CSV.
"""
import logging

import numpy as np
from scipy.special import factorial

from .exceptions import AlignmentError, DiagnosticDomainError, PairingError
from .pfdiff import PFDiffConfig, pfdiff_sample
from .records import TrajectoryRecord
from .schedule import make_grid, uniform_lambda_times
from .solvers import SolverStep, baseline_sample, reference_solve, seed_chains

logger = logging.getLogger(__name__)

__all__ = [
    'TrajectoryRecord', 'mse_vs_dt', 'springboard_vs_future', 'accumulated_truncation',
    'prop1_check', 'prop1_sweep', 'trajectory_planarity', 'planarity_table', 'eta_sweep',
    'solver_convergence', 'TABLE_COLUMNS',
]

# CSV layout of every diagnostic table
TABLE_COLUMNS = {
    'mse-dt': ['dt', 'mse'],
    'springboard': ['t', 'mse_springboard', 'mse_future_state', 't_springboard', 'mse_springboard_state',
                    'mse_future_score'],
    'truncation': ['t', 'mean', 'std'],
    'planarity': ['chain_id', 'fraction'],
    'eta-sweep': ['N', 'eta', 'pfdiff_mse', 'baseline_mse'],
    'convergence': ['order', 'M', 'error', 'observed_order'],
}


def _squared_distance(a, b):
    return np.sum((np.asarray(a) - np.asarray(b)) ** 2, axis=-1)


def mse_vs_dt(model, sched, n_chains, dt_list, seed=0, eta=0.0, x_T=None):
    """Mean ||eps(x_t, t) - eps(x_{t+dt}, t+dt)||^2 along every-index trajectories

    x_T overrides the seeded starting states; noise streams still come from seed.
    """
    dt_list = [int(dt) for dt in dt_list]
    for dt in dt_list:
        if not 0 <= dt <= sched.T - 1:
            raise DiagnosticDomainError(f"dt must lie in [0, {sched.T - 1}], got {dt}")
    seeded, noise, chain_ids = seed_chains(seed, n_chains, model.dim)
    x_T = seeded if x_T is None else np.asarray(x_T, dtype=np.float64)
    reference = reference_solve(model, sched, x_T, log_scores=True, chain_ids=chain_ids, eta=eta, rng=noise)
    # recorded from t = T-1 down to 0; flip so row t holds eps at time t
    scores = reference.scores[::-1]

    rows = []
    for dt in dt_list:
        if dt == 0:
            mse = 0.0
        else:
            mse = float(np.mean(_squared_distance(scores[:-dt], scores[dt:])))
        rows.append({'dt': dt, 'mse': mse})
        logger.debug('mse_vs_dt dt=%d: %.6g', dt, mse)
    return rows


def springboard_vs_future(model, sched, config, n_chains, seed=0, grid_kind='uniform', phi=None):
    """Per skip iteration: state error via the springboard path vs via the future score

    Each row also reports, at the springboard time t_{i+h}, the springboard
    state's error and the error of the future score evaluated there.
    """
    if config.eta > 0:
        raise DiagnosticDomainError('The springboard comparison follows the deterministic path; use eta = 0')
    if config.mode != 'full':
        raise DiagnosticDomainError('The springboard comparison follows the full driver')
    if phi is None:
        phi = SolverStep(sched, 'ddim-eta' if config.p == 1 else 'dpm-solver', config.p)
    grid = config.make_grid(grid_kind, sched.T)
    x_T, _, chain_ids = seed_chains(seed, n_chains, model.dim)
    reference = reference_solve(model, sched, x_T, record=grid.points, log_scores=True, chain_ids=chain_ids)
    missing = set(grid.points[::config.p].tolist()) - set(reference.times.tolist())
    if missing:
        raise AlignmentError(f"Reference grid lacks time indices {sorted(missing)}")

    rows = []

    def observe(t_i, t_ih, t_next, x, x_spring, past, future, x_next):
        # keep going from the springboard on past scores alone
        via_springboard = phi.step(past, x_spring, t_ih, t_next)
        target = reference.at(t_next)
        rows.append({
            't': t_next,
            'mse_springboard': float(np.mean(_squared_distance(via_springboard, target))),
            'mse_future_state': float(np.mean(_squared_distance(x_next, target))),
            't_springboard': t_ih,
            'mse_springboard_state': float(np.mean(_squared_distance(x_spring, reference.at(t_ih)))),
            # scores[0] is eps at (x_spring, t_ih) for every order
            'mse_future_score': float(np.mean(_squared_distance(future.scores[0], reference.score_at(t_ih)))),
        })

    pfdiff_sample(config, phi, model, sched, grid, x_T, chain_ids=chain_ids, observer=observe)
    return rows


def accumulated_truncation(traj, ref_traj):
    """(t, mean, std) of ||x_t - x_t^ref||^2 at every time both trajectories record"""
    if not np.array_equal(traj.chain_ids, ref_traj.chain_ids):
        raise PairingError('Trajectory and reference hold different chains')
    shared = [t for t in traj.times.tolist() if t in set(ref_traj.times.tolist())]
    if not shared:
        raise AlignmentError('Trajectory and reference share no time indices')
    skipped = len(traj.times) - len(shared)
    if skipped:
        logger.warning('Skipping %d trajectory points missing from the reference grid', skipped)

    rows = []
    for t in shared:
        errors = _squared_distance(traj.at(t), ref_traj.at(t))
        rows.append({'t': t, 'mean': float(errors.mean()), 'std': float(errors.std())})
    return rows


def _prop1_terms(t_prev, t_cur, epsilon, n):
    lhs = np.abs((t_cur - epsilon) ** n - (t_prev - epsilon) ** n) / factorial(n, exact=False)
    rhs = np.abs((t_cur - t_prev) ** n) / factorial(n, exact=False)
    return lhs, rhs


def prop1_check(t_prev, t_cur, epsilon, n_max):
    """Coefficient table for n = 2..n_max; epsilon strictly between t_prev and t_cur"""
    if n_max < 2:
        raise DiagnosticDomainError(f"n_max must be at least 2, got {n_max}")
    if not t_prev < epsilon < t_cur:
        raise DiagnosticDomainError(f"Need t_prev < epsilon < t_cur, got ({t_prev}, {epsilon}, {t_cur})")
    rows = []
    for n in range(2, n_max + 1):
        lhs, rhs = _prop1_terms(float(t_prev), float(t_cur), float(epsilon), n)
        rows.append({'n': n, 'lhs': float(lhs), 'rhs': float(rhs), 'holds': bool(lhs < rhs)})
    return rows


def prop1_sweep(samples, n_max=10, seed=0, T=1000):
    """Randomized witness over (t_prev, t_cur, epsilon) tuples, all n = 2..n_max"""
    if samples < 1:
        raise DiagnosticDomainError(f"samples must be at least 1, got {samples}")
    if n_max < 2:
        raise DiagnosticDomainError(f"n_max must be at least 2, got {n_max}")
    rng = np.random.default_rng(seed)
    ends = np.sort(rng.uniform(0.0, T, size=(samples, 2)), axis=1)
    t_prev, t_cur = ends[:, 0], ends[:, 1]
    epsilon = t_prev + rng.uniform(size=samples) * (t_cur - t_prev)
    valid = (t_prev < epsilon) & (epsilon < t_cur)

    failures = np.zeros(samples, dtype=bool)
    for n in range(2, n_max + 1):
        lhs, rhs = _prop1_terms(t_prev, t_cur, epsilon, n)
        failures |= valid & ~(lhs < rhs)

    counterexamples = [
        {'t_prev': float(t_prev[i]), 't_cur': float(t_cur[i]), 'epsilon': float(epsilon[i])}
        for i in np.flatnonzero(failures)[:10]
    ]
    return {
        'samples': samples,
        'checked': int(valid.sum()),
        'rejected': int((~valid).sum()),
        'failed': int(failures.sum()),
        'n_max': n_max,
        'seed': seed,
        'counterexamples': counterexamples,
    }


def trajectory_planarity(states):
    """Share of variance in the top two principal components of one trajectory"""
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] < 2:
        raise DiagnosticDomainError('Planarity needs a (steps, D) trajectory with D >= 2')
    if len(states) < 4:
        raise DiagnosticDomainError('Planarity needs at least three steps')
    centered = states - states.mean(axis=0)
    variances = np.linalg.svd(centered, compute_uv=False) ** 2
    total = variances.sum()
    if total == 0.0:
        return 1.0
    return float((variances[0] + variances[1]) / total)


def planarity_table(record):
    return [
        {'chain_id': int(chain), 'fraction': trajectory_planarity(record.states[:, i])}
        for i, chain in enumerate(record.chain_ids)
    ]


def eta_sweep(model, sched, N_list, eta_list, config=None, n_chains=256, seed=0, grid_kind='uniform'):
    """PFDiff and baseline endpoint errors per (N, eta) against the eta = 0 reference"""
    config = config or PFDiffConfig()
    for eta in eta_list:
        if not 0.0 <= eta <= 1.0:
            raise DiagnosticDomainError(f"eta must lie in [0, 1], got {eta}")
    x_T, _, chain_ids = seed_chains(seed, n_chains, model.dim)
    target = reference_solve(model, sched, x_T, record=[0], chain_ids=chain_ids).meta['endpoint']

    rows = []
    for N in N_list:
        for eta in eta_list:
            run_config = PFDiffConfig(k=config.k, h=config.h, p=1, N=N, mode=config.mode, eta=eta)
            phi = SolverStep(sched, 'ddim-eta', 1, eta)
            _, noise, _ = seed_chains(seed, n_chains, model.dim)
            pfdiff = pfdiff_sample(run_config, phi, model, sched, run_config.make_grid(grid_kind, sched.T),
                                   x_T, noise, chain_ids)
            _, noise, _ = seed_chains(seed, n_chains, model.dim)
            baseline = baseline_sample(phi, model, make_grid(grid_kind, N, sched.T), x_T, noise, chain_ids)
            rows.append({
                'N': N,
                'eta': eta,
                'pfdiff_mse': float(np.mean(_squared_distance(pfdiff.x_0, target))),
                'baseline_mse': float(np.mean(_squared_distance(baseline.x_0, target))),
            })
    return rows


def solver_convergence(model, sched, order, M_list, n_chains=64, seed=0):
    """Endpoint RMS error of DPM-Solver-p on lambda-uniform grids, with observed order"""
    mixture = getattr(model, 'mixture', None)
    if mixture is None or mixture.n_components != 1:
        raise DiagnosticDomainError('Convergence order needs the closed-form flow of a single-Gaussian model')
    x_T, _, chain_ids = seed_chains(seed, n_chains, model.dim)
    t_start, t_end = sched.T - 1, 0
    exact = model.analytic_flow(x_T, t_start, t_end)
    phi = SolverStep(sched, 'dpm-solver', order)

    rows = []
    for M in sorted(int(M) for M in M_list):
        times = uniform_lambda_times(sched, M, t_start, t_end)
        result = baseline_sample(phi, model, times, x_T, chain_ids=chain_ids)
        error = float(np.sqrt(np.mean(_squared_distance(result.x_0, exact))))
        observed = None
        if rows:
            observed = float(np.log(rows[-1]['error'] / error) / np.log(M / rows[-1]['M']))
        rows.append({'M': M, 'error': error, 'observed_order': observed})
    return rows
