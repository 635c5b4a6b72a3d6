# sampling/score.py
"""
Analytic score oracles. A Gaussian mixture q_0 pushed through the VP forward
process stays a Gaussian mixture, so scores and noise predictions are exact.
"""
import json
import logging
import threading
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp, softmax

from .exceptions import MixtureError

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


class GaussianMixture:
    """Weights, means and covariances of a finite Gaussian mixture"""

    def __init__(self, weights, means, covariances):
        weights = np.asarray(weights, dtype=np.float64)
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        covariances = np.asarray(covariances, dtype=np.float64)
        if covariances.ndim == 2:
            covariances = covariances[None]

        J, D = means.shape
        if weights.shape != (J,) or covariances.shape != (J, D, D):
            raise MixtureError(
                f"Shape mismatch: weights {weights.shape}, means {means.shape}, covariances {covariances.shape}"
            )
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise MixtureError(f"Weights must be positive and sum to 1, got {weights.tolist()}")
        if not np.allclose(covariances, np.swapaxes(covariances, 1, 2), rtol=0.0, atol=1e-12):
            raise MixtureError('Covariances must be symmetric')
        try:
            self.cholesky = np.linalg.cholesky(covariances)
        except np.linalg.LinAlgError as exc:
            raise MixtureError('Covariances must be positive definite') from exc

        self.weights = weights
        self.means = means
        self.covariances = covariances
        eye = np.eye(D)
        self.precisions = np.stack([cho_solve((L, True), eye) for L in self.cholesky])
        self.log_dets = 2.0 * np.sum(np.log(np.diagonal(self.cholesky, axis1=1, axis2=2)), axis=1)

    @property
    def n_components(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.means.shape[1]

    def __repr__(self):
        return f"GaussianMixture(J={self.n_components}, D={self.dim})"

    def log_density(self, x):
        return logsumexp(self._component_log_pdf(np.atleast_2d(x))[0], axis=1)

    def score(self, x):
        """Gradient of log density at each row of x"""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        log_pdf, solved = self._component_log_pdf(x)
        # responsibilities in log space; far-tail points would underflow otherwise
        resp = softmax(log_pdf, axis=1)
        return -np.einsum('nj,jnd->nd', resp, solved)

    def _component_log_pdf(self, x):
        """Per-component weighted log pdf (n, J) and Sigma_j^-1 (x - mu_j) (J, n, D)"""
        n, D = x.shape
        log_pdf = np.empty((n, self.n_components))
        solved = np.empty((self.n_components, n, D))
        # row-wise einsum keeps each chain independent of the batch it runs in
        for j in range(self.n_components):
            diff = x - self.means[j]
            solved[j] = np.einsum('de,ne->nd', self.precisions[j], diff)
            maha = np.einsum('nd,nd->n', diff, solved[j])
            log_pdf[:, j] = np.log(self.weights[j]) - 0.5 * (maha + self.log_dets[j] + D * LOG_2PI)
        return log_pdf, solved

    def sample(self, n, rng):
        """Exact draws from the mixture"""
        component = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[component] + np.einsum('nij,nj->ni', self.cholesky[component], z)

    def as_dict(self):
        return {
            'weights': self.weights.tolist(),
            'means': self.means.tolist(),
            'covariances': self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data['weights'], data['means'], data['covariances'])
        except KeyError as exc:
            raise MixtureError(f"Mixture document is missing {exc.args[0]!r}") from exc

    @classmethod
    def from_json(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise MixtureError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data)


class CountingModel:
    """Shared call counters; the only mutable state of a score model"""

    def __init__(self, schedule):
        self.schedule = schedule
        self._lock = threading.Lock()
        self.call_count = 0
        self.batch_count = 0

    def _count(self, n_points):
        with self._lock:
            self.call_count += n_points
            self.batch_count += 1

    def reset(self):
        with self._lock:
            self.call_count = 0
            self.batch_count = 0


class ScoreModel(CountingModel):
    """Exact score and noise prediction of a Gaussian-mixture diffusion"""

    def __init__(self, mixture, schedule):
        super().__init__(schedule)
        self.mixture = mixture

    @property
    def dim(self):
        return self.mixture.dim

    def __repr__(self):
        return f"ScoreModel({self.mixture!r}, {self.schedule!r})"

    def marginal_at(self, t):
        """Forward marginal q_t: component j becomes N(a mu_j, a^2 S_j + s^2 I)"""
        alpha, sigma = self.schedule.alpha(t), self.schedule.sigma(t)
        eye = np.eye(self.dim)
        return GaussianMixture(
            self.mixture.weights,
            alpha * self.mixture.means,
            alpha ** 2 * self.mixture.covariances + sigma ** 2 * eye,
        )

    def score_at(self, x, t):
        return self.marginal_at(t).score(x).reshape(np.shape(x))

    def log_density(self, x, t):
        return self.marginal_at(t).log_density(x)

    def eps_pred(self, x, t):
        """eps = -sigma_t * score; counts one evaluation per row"""
        x = np.asarray(x, dtype=np.float64)
        self._count(1 if x.ndim == 1 else x.shape[0])
        return -self.schedule.sigma(t) * self.score_at(x, t)

    def analytic_flow(self, x, t_from, t_to):
        """Exact probability-flow map between two times (single Gaussian only)"""
        if self.mixture.n_components != 1:
            raise MixtureError('The closed-form flow needs a single-component mixture')
        mean, cov = self.mixture.means[0], self.mixture.covariances[0]
        eigvals, eigvecs = np.linalg.eigh(cov)
        sched = self.schedule
        var_from = sched.alpha(t_from) ** 2 * eigvals + sched.sigma(t_from) ** 2
        var_to = sched.alpha(t_to) ** 2 * eigvals + sched.sigma(t_to) ** 2
        transport = (eigvecs * np.sqrt(var_to / var_from)) @ eigvecs.T
        deviation = np.asarray(x, dtype=np.float64) - sched.alpha(t_from) * mean
        return sched.alpha(t_to) * mean + deviation @ transport.T


class ConstantScoreModel(CountingModel):
    """eps(x, t) = c everywhere; every skip and replacement is exact"""

    def __init__(self, schedule, value):
        super().__init__(schedule)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def dim(self):
        return len(self.value)

    def __repr__(self):
        return f"ConstantScoreModel(value={self.value.tolist()})"

    def eps_pred(self, x, t):
        x = np.asarray(x, dtype=np.float64)
        self._count(1 if x.ndim == 1 else x.shape[0])
        return np.broadcast_to(self.value, x.shape).copy()

    def score_at(self, x, t):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(-self.value / self.schedule.sigma(t), x.shape).copy()


def _isotropic(means, variance, weights=None):
    means = np.asarray(means, dtype=np.float64)
    J, D = means.shape
    weights = np.full(J, 1.0 / J) if weights is None else weights
    return GaussianMixture(weights, means, np.tile(variance * np.eye(D), (J, 1, 1)))


def _ring(n_components=8, radius=4.0, variance=0.09):
    angle = 2.0 * np.pi * np.arange(n_components) / n_components
    return _isotropic(radius * np.stack([np.cos(angle), np.sin(angle)], axis=1), variance)


MIXTURE_PRESETS = {
    'std-normal-2d': lambda: GaussianMixture([1.0], [[0.0, 0.0]], [np.eye(2)]),
    'bimodal-2d': lambda: _isotropic([[2.0, 2.0], [-2.0, -2.0]], 0.25),
    'ring-8': _ring,
    'gaussian-2d': lambda: GaussianMixture([1.0], [[1.0, -0.5]], [np.diag([0.25, 0.5])]),
    'mixture-10d': lambda: _isotropic(3.0 * np.eye(10)[:4], 0.25),
}

CONSTANT_PRESET = 'constant'
CONSTANT_VALUE = (0.3, -0.2)

PRESET_NAMES = tuple(MIXTURE_PRESETS) + (CONSTANT_PRESET,)


def preset_mixture(name):
    try:
        return MIXTURE_PRESETS[name]()
    except KeyError:
        raise MixtureError(f"Unknown mixture preset {name!r}") from None


def build_model(schedule, preset=None, mixture_path=None):
    """Score model for a named preset or a mixture JSON document"""
    if mixture_path:
        mixture = GaussianMixture.from_json(mixture_path)
        logger.info('Loaded %r from %s', mixture, mixture_path)
        return ScoreModel(mixture, schedule)
    if preset == CONSTANT_PRESET:
        return ConstantScoreModel(schedule, CONSTANT_VALUE)
    return ScoreModel(preset_mixture(preset), schedule)
