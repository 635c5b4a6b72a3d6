# sampling/pfdiff.py
"""
PFDiff-k_h timestep skipping.

Each iteration jumps k+1 grid steps for one batch of scores: the buffered
past scores carry the state to a springboard h steps ahead, a fresh batch is
computed there, and that future batch drives the whole jump from the current
state. For solvers with p > 1 the jump is taken from the springboard instead,
and the driver walks every p-th grid point so each buffer fill costs p
evaluations.
"""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from django.conf import settings

from .exceptions import ConfigInvariantError, StaleBufferError
from .records import SampleResult, ScoreBuffer, TrajectoryRecord
from .schedule import make_grid
from .solvers import SolverStep, reference_solve, seed_chains

logger = logging.getLogger(__name__)

MODES = ('full', 'past-only', 'future-only')

# search near-ties: relative, and absolute for squared errors at rounding level
TIE_RTOL = 1e-9
TIE_ATOL = 1e-12

PFDiffResult = SampleResult

__all__ = [
    'MODES', 'PFDiffConfig', 'PFDiffResult', 'ScoreBuffer', 'BufferSlot', 'SearchReport',
    'springboard_step', 'future_update', 'pfdiff_sample', 'pfdiff_variant', 'auto_search_kh',
]


@dataclass(frozen=True)
class PFDiffConfig:
    k: int = 1
    h: int = 1
    p: int = 1
    N: int = 10
    mode: str = 'full'
    eta: float = 0.0

    def __post_init__(self):
        if self.k not in (1, 2, 3):
            raise ConfigInvariantError(f"k must be 1, 2 or 3, got {self.k}")
        if not 1 <= self.h <= self.k:
            raise ConfigInvariantError(f"Need 1 <= h <= k, got h={self.h}, k={self.k}")
        if self.p not in (1, 2, 3):
            raise ConfigInvariantError(f"Solver order p must be 1, 2 or 3, got {self.p}")
        if self.mode not in MODES:
            raise ConfigInvariantError(f"Unknown mode {self.mode!r}; expected one of {MODES}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigInvariantError(f"eta must lie in [0, 1], got {self.eta}")
        if self.N < 2:
            raise ConfigInvariantError(f"The NFE budget N must be at least 2, got {self.N}")
        if self.p > 1:
            if self.N % self.p:
                raise ConfigInvariantError(f"N={self.N} is not a whole number of order-{self.p} steps")
            if self.mode == 'future-only':
                raise ConfigInvariantError('future-only mode needs a first-order solver')
        if self.grid_size <= 0 or self.grid_size % self.p:
            raise ConfigInvariantError(f"Grid size (k+1)N - kp = {self.grid_size} must be positive and divisible by p")

    @property
    def grid_size(self):
        """Number of grid intervals M = (k+1)N - kp"""
        return (self.k + 1) * self.N - self.k * self.p

    @property
    def label(self):
        return f"PFDiff-{self.k}_{self.h}"

    def make_grid(self, kind, T):
        return make_grid(kind, self.grid_size, T)

    def as_manifest(self):
        return asdict(self)


class BufferSlot:
    """Single-slot store for Q; every store overwrites"""

    def __init__(self, strict=None):
        self.buffer = None
        self.strict = strict_buffers() if strict is None else strict

    def store(self, buffer):
        self.buffer = buffer
        return buffer


def strict_buffers():
    return settings.PFDIFF_STRICT_BUFFERS if settings.configured else True


def _check_tag(buffer, expected, strict, what):
    if buffer.tag == tuple(expected):
        logger.debug('%s buffer tag %s ok', what, buffer.tag)
        return
    message = f"{what} buffer tagged {buffer.tag}, expected {tuple(expected)}"
    if strict:
        raise StaleBufferError(message)
    logger.warning(message)


def springboard_step(phi, Q, x, t_i, t_ih, expected=None, rng=None, strict=None):
    """Carry x to the springboard t_{i+h} with past scores only"""
    if Q is None:
        raise StaleBufferError('Springboard step with an empty buffer')
    strict = strict_buffers() if strict is None else strict
    if expected is not None:
        _check_tag(Q, expected, strict, 'Past')
    elif Q.t_end != t_i:
        _check_tag(Q, (Q.t_start, t_i), strict, 'Past')
    return phi.step(Q, x, t_i, t_ih, rng)


def future_update(phi, Q_future, x_anchor, x_springboard, t_i, t_ih, t_next, p=1, anchor=None,
                  rng=None, strict=None):
    """Jump to t_{i+k+1} with the scores computed at the springboard

    First-order solvers anchor the jump at the current state; higher orders
    (and past-only mode) continue from the springboard.
    """
    strict = strict_buffers() if strict is None else strict
    _check_tag(Q_future, (t_ih, t_next), strict, 'Future')
    anchor = anchor or ('current' if p == 1 else 'springboard')
    if anchor == 'current':
        return phi.step(Q_future, x_anchor, t_i, t_next, rng)
    return phi.step(Q_future, x_springboard, t_ih, t_next, rng)


@dataclass
class _Recorder:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def add(self, t, x):
        self.times.append(int(t))
        self.states.append(x)

    def build(self, chain_ids, grid, **meta):
        return TrajectoryRecord(
            times=np.array(self.times), states=np.stack(self.states), chain_ids=chain_ids,
            grid=grid, meta=meta,
        )


def _validate(config, phi, grid):
    if grid.M != config.grid_size:
        raise ConfigInvariantError(
            f"{config.label} with N={config.N}, p={config.p} needs {config.grid_size} grid intervals, got {grid.M}"
        )
    if phi.order != config.p:
        raise ConfigInvariantError(f"Config order p={config.p} but the solver is order {phi.order}")
    if phi.eta != config.eta:
        raise ConfigInvariantError(f"Config eta={config.eta} but the solver uses eta={phi.eta}")


def pfdiff_sample(config, phi, model, sched, grid, x_T, rng=None, chain_ids=None, strict=None, observer=None):
    """Run the PFDiff driver over `grid`; returns endpoint, trajectory and NFE counts"""
    _validate(config, phi, grid)
    if config.mode == 'future-only':
        return _future_only(config, phi, model, grid, x_T, rng, chain_ids, strict)
    anchor = 'springboard' if config.mode == 'past-only' or config.p > 1 else 'current'
    return _skip_loop(config, phi, model, grid, x_T, rng, chain_ids, strict, anchor, observer)


def pfdiff_variant(config, phi, model, sched, grid, x_T, rng=None, chain_ids=None, strict=None):
    """Ablation modes: past-only or future-only"""
    if config.mode not in ('past-only', 'future-only'):
        raise ConfigInvariantError(f"pfdiff_variant runs past-only or future-only, got {config.mode!r}")
    return pfdiff_sample(config, phi, model, sched, grid, x_T, rng, chain_ids, strict)


def _skip_loop(config, phi, model, grid, x_T, rng, chain_ids, strict, anchor, observer):
    k, h = config.k, config.h
    points = [int(t) for t in grid.points[::config.p]]
    M = len(points) - 1
    x = np.array(x_T, dtype=np.float64)
    chain_ids = np.arange(len(x)) if chain_ids is None else chain_ids
    slot = BufferSlot(strict)
    recorder = _Recorder()
    recorder.add(points[0], x)

    # init: fill Q over (t_0, t_1) and take one plain step
    slot.store(phi.evaluate(model, x, points[0], points[1]))
    fills = 1
    x = phi.step(slot.buffer, x, points[0], points[1], rng)
    recorder.add(points[1], x)

    for i in range(1, M, k + 1):
        t_i, t_ih, t_next = points[i], points[i + h], points[i + k + 1]
        past = slot.buffer
        expected = (points[0], points[1]) if i == 1 else (points[i - (k + 1) + h], t_i)
        x_spring = springboard_step(phi, past, x, t_i, t_ih, expected=expected, rng=rng, strict=slot.strict)

        future = slot.store(phi.evaluate(model, x_spring, t_ih, t_next))
        fills += 1
        x_next = future_update(phi, future, x, x_spring, t_i, t_ih, t_next, p=config.p, anchor=anchor,
                               rng=rng, strict=slot.strict)
        if observer is not None:
            observer(t_i=t_i, t_ih=t_ih, t_next=t_next, x=x, x_spring=x_spring, past=past, future=future,
                     x_next=x_next)
        x = x_next
        recorder.add(t_next, x)

    logger.info('%s %s: %d buffer fills, %d model evaluations per chain',
                config.label, config.mode, fills, fills * config.p)
    trajectory = recorder.build(chain_ids, grid, mode=config.mode)
    return SampleResult(x_0=x, trajectory=trajectory, nfe_batches=fills, nfe_evals=fills * config.p)


def future_only_anchors(config):
    """Grid indices of the future-only schedule: (leading plain step, [(a, look, b), ...])"""
    M, N = config.grid_size, config.N
    jumps, lead = divmod(N, 2)
    start = 1 if lead else 0
    span = M - start
    anchors = [start + round(j * span / jumps) for j in range(jumps + 1)]
    plan = []
    for a, b in zip(anchors[:-1], anchors[1:]):
        offset = round((b - a) * config.h / (config.k + 1))
        plan.append((a, a + min(max(offset, 1), b - a - 1), b))
    return bool(lead), plan


def _future_only(config, phi, model, grid, x_T, rng, chain_ids, strict):
    points = [int(t) for t in grid.points]
    x = np.array(x_T, dtype=np.float64)
    chain_ids = np.arange(len(x)) if chain_ids is None else chain_ids
    strict = strict_buffers() if strict is None else strict
    recorder = _Recorder()
    recorder.add(points[0], x)
    lead, plan = future_only_anchors(config)
    fills = 0
    if lead:
        x, _ = phi.advance(model, x, points[0], points[1], rng)
        fills += 1
        recorder.add(points[1], x)

    for a, look, b in plan:
        t_a, t_look, t_b = points[a], points[look], points[b]
        # look-ahead with the current score, then a fresh score there
        x_look, _ = phi.advance(model, x, t_a, t_look, rng)
        future = phi.evaluate(model, x_look, t_look, t_b)
        fills += 2
        x = future_update(phi, future, x, x_look, t_a, t_look, t_b, p=1, anchor='current', rng=rng, strict=strict)
        recorder.add(t_b, x)

    logger.info('%s future-only: %d model batches', config.label, fills)
    trajectory = recorder.build(chain_ids, grid, mode=config.mode)
    return SampleResult(x_0=x, trajectory=trajectory, nfe_batches=fills, nfe_evals=fills)


@dataclass
class SearchReport:
    choice: tuple
    rows: list
    tied: list
    warmup: int
    seed: int

    @property
    def tie_broken(self):
        return len(self.tied) > 1


def _candidate_key(pair):
    return (pair[0], pair[1])


def auto_search_kh(candidates, model, sched, N, warmup=256, seed=0, grid_kind='uniform',
                   family='ddim-eta', p=1, eta=0.0, n_ref=None):
    """Pick (k, h) with the smallest warmup endpoint error against the reference"""
    candidates = sorted({(int(k), int(h)) for k, h in candidates}, key=_candidate_key)
    if not candidates:
        raise ConfigInvariantError('The (k, h) search needs at least one candidate')
    if warmup < 16:
        raise ConfigInvariantError(f"Warmup needs at least 16 chains, got {warmup}")

    x_T, _, chain_ids = seed_chains(seed, warmup, model.dim)
    reference = reference_solve(model, sched, x_T, n_ref=n_ref, record=[0], chain_ids=chain_ids)
    target = reference.meta['endpoint']

    rows = []
    for k, h in candidates:
        config = PFDiffConfig(k=k, h=h, p=p, N=N, eta=eta)
        phi = SolverStep(sched, family, p, eta)
        _, noise, _ = seed_chains(seed, warmup, model.dim)
        result = pfdiff_sample(config, phi, model, sched, config.make_grid(grid_kind, sched.T), x_T, noise, chain_ids)
        errors = np.sum((result.x_0 - target) ** 2, axis=1)
        rows.append({'k': k, 'h': h, 'mean': float(errors.mean()), 'std': float(errors.std())})
        logger.info('Search %s: mean endpoint error %.6g', config.label, rows[-1]['mean'])

    best = min(row['mean'] for row in rows)
    tolerance = max(TIE_ATOL, TIE_RTOL * best)
    tied = [(row['k'], row['h']) for row in rows if row['mean'] <= best + tolerance]
    choice = min(tied, key=_candidate_key)
    return SearchReport(choice=choice, rows=rows, tied=tied, warmup=warmup, seed=seed)
