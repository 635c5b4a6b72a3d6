# sampling/schedule.py
"""
Discrete variance-preserving noise schedules and the descending time grids
every solver steps along.

The schedule is defined on integer indices 0..T-1. Interior nodes of the
higher-order exponential integrators land between indices, so log(alpha) is
extended to continuous t by piecewise-linear interpolation and lambda can be
inverted back to a continuous index.
"""
import logging

import numpy as np

from .exceptions import GridCollisionError, ScheduleRangeError

logger = logging.getLogger(__name__)

GRID_KINDS = ('uniform', 'quadratic')


class NoiseSchedule:
    """VP schedule with alpha(t)^2 + sigma(t)^2 = 1 at every index"""

    kind = 'vp-linear'

    def __init__(self, beta, beta_min=None, beta_max=None):
        beta = np.asarray(beta, dtype=np.float64)
        self.T = len(beta)
        self.beta_min = float(beta[0]) if beta_min is None else beta_min
        self.beta_max = float(beta[-1]) if beta_max is None else beta_max
        self.beta = beta
        self.log_alpha_bar = np.cumsum(np.log1p(-beta))
        self.alpha_bar = np.exp(self.log_alpha_bar)
        self.log_alpha_array = 0.5 * self.log_alpha_bar
        self._index = np.arange(self.T, dtype=np.float64)
        for array in (self.beta, self.log_alpha_bar, self.alpha_bar, self.log_alpha_array, self._index):
            array.setflags(write=False)

    def __repr__(self):
        return f"NoiseSchedule(T={self.T}, beta_min={self.beta_min}, beta_max={self.beta_max})"

    def log_alpha(self, t):
        """log(alpha_t); exact at integer t, linear in between"""
        value = np.interp(t, self._index, self.log_alpha_array)
        return float(value) if np.ndim(value) == 0 else value

    def alpha_bar_at(self, t):
        return np.exp(2.0 * self.log_alpha(t))

    def alpha(self, t):
        return np.exp(self.log_alpha(t))

    def sigma(self, t):
        return np.sqrt(-np.expm1(2.0 * self.log_alpha(t)))

    def lam(self, t):
        """Half log-SNR lambda_t = log(alpha_t / sigma_t)"""
        log_alpha = self.log_alpha(t)
        return log_alpha - 0.5 * np.log(-np.expm1(2.0 * log_alpha))

    def inverse_lambda(self, lam):
        """Continuous time index whose lambda equals `lam`"""
        log_alpha = -0.5 * np.logaddexp(0.0, -2.0 * np.asarray(lam, dtype=np.float64))
        t = np.interp(log_alpha, self.log_alpha_array[::-1], self._index[::-1])
        return float(t) if np.ndim(t) == 0 else t

    def as_manifest(self):
        return {
            'kind': self.kind,
            'T': self.T,
            'beta_min': self.beta_min,
            'beta_max': self.beta_max,
        }


class TimeGrid:
    """Strictly decreasing integer time indices from T-1 down to 0"""

    def __init__(self, points, kind='uniform'):
        points = np.asarray(points, dtype=np.int64)
        if points.ndim != 1 or len(points) < 2:
            raise GridCollisionError('A grid needs at least two points')
        if np.any(np.diff(points) >= 0):
            raise GridCollisionError(f"Grid points are not strictly decreasing: {points.tolist()}")
        if points[-1] != 0:
            raise GridCollisionError('Grid must end at index 0')
        points.setflags(write=False)
        self.points = points
        self.kind = kind

    @property
    def M(self):
        return len(self.points) - 1

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return int(self.points[i])

    def __iter__(self):
        return (int(t) for t in self.points)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"TimeGrid(kind={self.kind!r}, M={self.M})"

    def as_manifest(self):
        return {'kind': self.kind, 'M': self.M, 'points': self.points.tolist()}


def make_vp_linear(T=1000, beta_min=1e-4, beta_max=0.02):
    """Linear beta schedule: beta[i] = beta_min + i*(beta_max - beta_min)/(T-1)"""
    if T < 2:
        raise ScheduleRangeError(f"T must be at least 2, got {T}")
    if not 0 < beta_min <= beta_max < 1:
        raise ScheduleRangeError(
            f"Need 0 < beta_min <= beta_max < 1, got beta_min={beta_min}, beta_max={beta_max}"
        )
    beta = beta_min + np.arange(T, dtype=np.float64) * (beta_max - beta_min) / (T - 1)
    return NoiseSchedule(beta, beta_min=beta_min, beta_max=beta_max)


def make_grid(kind, M, T):
    """Descending grid of M intervals over indices T-1..0"""
    if kind not in GRID_KINDS:
        raise GridCollisionError(f"Unknown grid kind {kind!r}; expected one of {GRID_KINDS}")
    if not 1 <= M <= T - 1:
        raise GridCollisionError(f"Need 1 <= M <= T-1, got M={M}, T={T}")

    fraction = 1.0 - np.arange(M + 1) / M
    if kind == 'quadratic':
        fraction = fraction ** 2
    # np.round rounds half to even, same as round() on Python floats
    points = np.round((T - 1) * fraction).astype(np.int64)
    points[0], points[-1] = T - 1, 0

    # point i must leave room for M-i distinct indices below it
    index = np.arange(M + 1)
    floor, ceiling = M - index, T - 1 - index
    repaired = int(np.count_nonzero((points < floor) | (points > ceiling)))
    points = np.clip(points, floor, ceiling)

    for i in range(1, M):
        if points[i] >= points[i - 1]:
            points[i] = points[i - 1] - 1
            repaired += 1
    if np.any(np.diff(points) >= 0) or points[M - 1] <= 0:
        raise GridCollisionError(f"Cannot restore strict descent for {kind} grid with M={M}, T={T}")
    if repaired:
        logger.debug('Repaired %d colliding %s grid points (M=%d, T=%d)', repaired, kind, M, T)
    return TimeGrid(points, kind=kind)


def uniform_lambda_times(sched, M, t_start=None, t_end=0):
    """Continuous times equally spaced in lambda between two indices"""
    t_start = sched.T - 1 if t_start is None else t_start
    lams = np.linspace(sched.lam(t_start), sched.lam(t_end), M + 1)
    times = np.asarray(sched.inverse_lambda(lams), dtype=np.float64)
    times[0], times[-1] = t_start, t_end
    return times
