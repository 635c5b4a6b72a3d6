# sampling/solvers.py
"""
Baseline step functions phi(Q, x, t_from, t_to, rng).

A SolverStep splits every solver into two halves: `evaluate` fills a score
buffer with the p model outputs a step needs, and `step` applies the update
using only the scores it is handed. PFDiff reuses buffers across intervals,
so the update half never touches the model.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import SolverDomainError, StaleBufferError
from .records import SampleResult, ScoreBuffer, TrajectoryRecord
from .schedule import make_grid

logger = logging.getLogger(__name__)

SOLVER_FAMILIES = ('ddim-eta', 'dpm-solver')

# interior nodes in lambda space, as fractions of the step
DPM_NODES = {1: (), 2: (0.5,), 3: (1.0 / 3.0, 2.0 / 3.0)}


class ChainNoise:
    """Independent standard-normal stream per chain"""

    def __init__(self, generators):
        self.generators = list(generators)

    def __len__(self):
        return len(self.generators)

    def standard_normal(self, dim):
        return np.stack([g.standard_normal(dim) for g in self.generators])

    def subset(self, start, stop):
        return ChainNoise(self.generators[start:stop])


def seed_chains(seed, n_chains, dim, first_chain=0):
    """x_T and noise streams for chains first_chain..first_chain+n_chains-1

    Chain i always gets the i-th child of SeedSequence(seed), so a chain's
    draws do not depend on how chains are split across workers.
    """
    children = np.random.SeedSequence(seed).spawn(first_chain + n_chains)[first_chain:]
    generators = [np.random.default_rng(child) for child in children]
    x_T = np.stack([g.standard_normal(dim) for g in generators])
    chain_ids = np.arange(first_chain, first_chain + n_chains)
    return x_T, ChainNoise(generators), chain_ids


@dataclass(frozen=True)
class FirstOrderParam:
    """x_to = x_bar - gamma * eps + xi * noise"""
    x_bar: np.ndarray
    gamma: float
    xi: float = 0.0


def _check_interval(t_from, t_to):
    if t_to > t_from:
        raise SolverDomainError(f"Steps run backwards in time, got t_from={t_from}, t_to={t_to}")


def ddim_step(sched, x, eps, t_from, t_to, eta=0.0, noise=None):
    """DDIM / eta-family update between two arbitrary time indices"""
    _check_interval(t_from, t_to)
    if not 0.0 <= eta <= 1.0:
        raise SolverDomainError(f"eta must lie in [0, 1], got {eta}")
    x = np.asarray(x, dtype=np.float64)
    if t_to == t_from:
        return x.copy()

    la_from, la_to = sched.log_alpha(t_from), sched.log_alpha(t_to)
    var_from, var_to = sched.sigma(t_from) ** 2, sched.sigma(t_to) ** 2
    ratio = np.exp(2.0 * (la_to - la_from))
    sigma_bar = eta * np.sqrt(var_to / var_from) * np.sqrt(-np.expm1(2.0 * (la_from - la_to)))
    direction = var_to - sigma_bar ** 2
    if direction < 0:
        raise SolverDomainError(f"1 - alpha_bar - sigma_bar^2 = {direction} < 0 between {t_from} and {t_to}")

    x_next = np.sqrt(ratio) * x + (np.sqrt(direction) - np.sqrt(ratio * var_from)) * eps
    if eta > 0:
        if noise is None:
            raise SolverDomainError('eta > 0 needs a noise draw')
        x_next = x_next + sigma_bar * noise
    return x_next


def first_order_param(sched, x, t_from, t_to):
    """Rescale-plus-direction form of the deterministic DDIM step"""
    _check_interval(t_from, t_to)
    x = np.asarray(x, dtype=np.float64)
    if t_to == t_from:
        return FirstOrderParam(x_bar=x.copy(), gamma=0.0)
    ratio = np.exp(2.0 * (sched.log_alpha(t_to) - sched.log_alpha(t_from)))
    alpha_bar_to = sched.alpha_bar_at(t_to)
    gamma = np.sqrt(ratio - alpha_bar_to) - sched.sigma(t_to)
    return FirstOrderParam(x_bar=np.sqrt(ratio) * x, gamma=float(gamma))


class SolverStep:
    """A p-order solver split into score evaluation and score consumption"""

    def __init__(self, schedule, family='ddim-eta', order=1, eta=0.0):
        if family not in SOLVER_FAMILIES:
            raise SolverDomainError(f"Unknown solver family {family!r}")
        if order not in DPM_NODES:
            raise SolverDomainError(f"Solver order must be 1, 2 or 3, got {order}")
        if family == 'ddim-eta' and order != 1:
            raise SolverDomainError('The DDIM family is first order')
        if family == 'dpm-solver' and eta != 0:
            raise SolverDomainError('DPM-Solver steps are deterministic; eta must be 0')
        if not 0.0 <= eta <= 1.0:
            raise SolverDomainError(f"eta must lie in [0, 1], got {eta}")
        self.schedule = schedule
        self.family = family
        self.order = order
        self.eta = eta

    def __repr__(self):
        return f"SolverStep(family={self.family!r}, order={self.order}, eta={self.eta})"

    def as_manifest(self):
        return {'family': self.family, 'order': self.order, 'eta': self.eta}

    def evaluate(self, model, x, t_from, t_to):
        """Fill a buffer with the p scores of one step over (t_from, t_to)"""
        _check_interval(t_from, t_to)
        if t_to == t_from:
            raise SolverDomainError('Cannot evaluate scores over an empty interval')
        eps_s = model.eps_pred(x, t_from)
        scores = [eps_s]
        if self.order > 1:
            sched = self.schedule
            lam_s = sched.lam(t_from)
            h = sched.lam(t_to) - lam_s
            la_s = sched.log_alpha(t_from)
            r1 = DPM_NODES[self.order][0]
            s1 = sched.inverse_lambda(lam_s + r1 * h)
            x_s1 = np.exp(sched.log_alpha(s1) - la_s) * x - sched.sigma(s1) * np.expm1(r1 * h) * eps_s
            eps_s1 = model.eps_pred(x_s1, s1)
            scores.append(eps_s1)
            if self.order == 3:
                r2 = DPM_NODES[3][1]
                s2 = sched.inverse_lambda(lam_s + r2 * h)
                sigma_s2 = sched.sigma(s2)
                phi_12 = np.expm1(r2 * h)
                phi_22 = phi_12 / (r2 * h) - 1.0
                x_s2 = (
                    np.exp(sched.log_alpha(s2) - la_s) * x
                    - sigma_s2 * phi_12 * eps_s
                    - (r2 / r1) * sigma_s2 * phi_22 * (eps_s1 - eps_s)
                )
                scores.append(model.eps_pred(x_s2, s2))
        return ScoreBuffer(tuple(scores), t_from, t_to)

    def step(self, buffer, x, t_from, t_to, rng=None):
        """phi: advance x with the scores already in the buffer; no model calls"""
        if buffer.order != self.order:
            raise StaleBufferError(f"Order-{self.order} step handed {buffer.order} scores")
        _check_interval(t_from, t_to)
        x = np.asarray(x, dtype=np.float64)
        if t_to == t_from:
            return x.copy()
        if self.family == 'ddim-eta':
            noise = None
            if self.eta > 0:
                if rng is None:
                    raise SolverDomainError('eta > 0 needs per-chain noise streams')
                noise = rng.standard_normal(x.shape[-1]).reshape(x.shape)
            return ddim_step(self.schedule, x, buffer.scores[0], t_from, t_to, self.eta, noise)
        return self._exponential_step(buffer.scores, x, t_from, t_to)

    def _exponential_step(self, scores, x, t_from, t_to):
        sched = self.schedule
        h = sched.lam(t_to) - sched.lam(t_from)
        sigma_t = sched.sigma(t_to)
        phi_1 = np.expm1(h)
        eps_s = scores[0]
        x_t = np.exp(sched.log_alpha(t_to) - sched.log_alpha(t_from)) * x - sigma_t * phi_1 * eps_s
        if self.order == 2:
            r1 = DPM_NODES[2][0]
            x_t = x_t - (0.5 / r1) * sigma_t * phi_1 * (scores[1] - eps_s)
        elif self.order == 3:
            r2 = DPM_NODES[3][1]
            phi_2 = phi_1 / h - 1.0
            x_t = x_t - (1.0 / r2) * sigma_t * phi_2 * (scores[2] - eps_s)
        return x_t

    def advance(self, model, x, t_from, t_to, rng=None):
        """Fresh scores at x, then one step"""
        buffer = self.evaluate(model, x, t_from, t_to)
        return self.step(buffer, x, t_from, t_to, rng), buffer


def dpm_solver_step(sched, model, x, t_from, t_to, order):
    """Singlestep DPM-Solver update; returns the new state and its score buffer"""
    _check_interval(t_from, t_to)
    if t_to == t_from:
        return np.array(x, dtype=np.float64), None
    return SolverStep(sched, 'dpm-solver', order).advance(model, x, t_from, t_to)


def baseline_sample(phi, model, grid, x_T, rng=None, chain_ids=None):
    """Plain solver run: fresh scores at every step of the grid"""
    x = np.array(x_T, dtype=np.float64)
    chain_ids = np.arange(len(x)) if chain_ids is None else chain_ids
    points = list(grid)
    states = [x]
    for t_from, t_to in zip(points[:-1], points[1:]):
        x, _ = phi.advance(model, x, t_from, t_to, rng)
        states.append(x)
    steps = len(points) - 1
    trajectory = TrajectoryRecord(times=np.array(points), states=np.stack(states), chain_ids=chain_ids, grid=grid)
    return SampleResult(x_0=x, trajectory=trajectory, nfe_batches=steps, nfe_evals=steps * phi.order)


def reference_solve(model, sched, x_T, n_ref=None, record=None, log_scores=False,
                    chain_ids=None, eta=0.0, rng=None):
    """Fine-grid DDIM trajectory used as ground truth

    n_ref defaults to the every-index grid (T-1 steps). `record` restricts
    which time indices are kept; scores are logged at recorded states.
    """
    n_ref = sched.T - 1 if n_ref is None else n_ref
    if n_ref < 100:
        raise SolverDomainError(f"Reference grids need at least 100 steps, got {n_ref}")
    grid = make_grid('uniform', n_ref, sched.T)
    keep = None if record is None else {int(t) for t in record}
    x = np.array(x_T, dtype=np.float64)
    chain_ids = np.arange(len(x)) if chain_ids is None else chain_ids

    times, states, scores = [], [], []
    points = list(grid)
    for t_from, t_to in zip(points[:-1], points[1:]):
        eps = model.eps_pred(x, t_from)
        if keep is None or t_from in keep:
            times.append(t_from)
            states.append(x)
            scores.append(eps)
        noise = rng.standard_normal(x.shape[-1]) if eta > 0 else None
        x = ddim_step(sched, x, eps, t_from, t_to, eta, noise)
    if keep is None or 0 in keep:
        times.append(0)
        states.append(x)
        if log_scores:
            scores.append(model.eps_pred(x, 0))

    logger.debug('Reference solve: %d steps, %d recorded states', n_ref, len(times))
    return TrajectoryRecord(
        times=np.array(times, dtype=np.int64),
        states=np.stack(states),
        chain_ids=chain_ids,
        scores=np.stack(scores) if log_scores else None,
        grid=grid,
        meta={'endpoint': x, 'eta': eta},
    )
