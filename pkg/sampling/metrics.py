# sampling/metrics.py
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm

from .exceptions import MetricError, PairingError

logger = logging.getLogger(__name__)


@dataclass
class SampleSet:
    """Points from one run, keyed by chain id"""
    points: np.ndarray
    chain_ids: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.chain_ids is None:
            self.chain_ids = np.arange(len(self.points))
        self.chain_ids = np.asarray(self.chain_ids, dtype=np.int64)
        if len(self.chain_ids) != len(self.points):
            raise MetricError(f"{len(self.chain_ids)} chain ids for {len(self.points)} points")
        if not np.all(np.isfinite(self.points)):
            raise MetricError('Sample sets must hold finite points only')

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]


def _as_psd(cov, name):
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
        raise MetricError(f"{name} must be a symmetric matrix")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.linalg.eigvalsh(cov).min() < -1e-10 * scale:
        raise MetricError(f"{name} is not positive semi-definite")
    return cov


def gaussian_w2(mean1, cov1, mean2, cov2):
    """Closed-form 2-Wasserstein distance between two Gaussians"""
    mean1, mean2 = np.atleast_1d(mean1).astype(np.float64), np.atleast_1d(mean2).astype(np.float64)
    cov1, cov2 = _as_psd(cov1, 'cov1'), _as_psd(cov2, 'cov2')
    if not (mean1.shape == mean2.shape and cov1.shape == cov2.shape == (len(mean1), len(mean1))):
        raise MetricError('Means and covariances must share one dimension')
    if np.array_equal(mean1, mean2) and np.array_equal(cov1, cov2):
        return 0.0
    root2 = sqrtm(cov2).real
    cross = sqrtm(root2 @ cov1 @ root2).real
    squared = np.sum((mean1 - mean2) ** 2) + np.trace(cov1 + cov2 - 2.0 * cross)
    return float(np.sqrt(max(squared, 0.0)))


def random_directions(dim, n_proj, seed):
    """Seeded unit directions, shape (n_proj, dim)"""
    if n_proj < 1:
        raise MetricError(f"n_proj must be at least 1, got {n_proj}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_proj, dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def _quantiles(projected, n_levels):
    if projected.shape[1] == n_levels:
        return np.sort(projected, axis=1)
    levels = (np.arange(n_levels) + 0.5) / n_levels
    return np.quantile(projected, levels, axis=1, method='inverted_cdf').T


def sliced_wasserstein(a, b, n_proj=128, seed=0, directions=None):
    """Mean over random directions of the 1-D W2 between projected samples"""
    a = a if isinstance(a, SampleSet) else SampleSet(a)
    b = b if isinstance(b, SampleSet) else SampleSet(b)
    if not len(a) or not len(b):
        raise MetricError('Sliced Wasserstein needs non-empty sample sets')
    if a.dim != b.dim:
        raise MetricError(f"Dimension mismatch: {a.dim} vs {b.dim}")
    if directions is None:
        directions = random_directions(a.dim, n_proj, seed)
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))

    n_levels = max(len(a), len(b))
    sorted_a = _quantiles(directions @ a.points.T, n_levels)
    sorted_b = _quantiles(directions @ b.points.T, n_levels)
    per_direction = np.sqrt(np.mean((sorted_a - sorted_b) ** 2, axis=1))
    return float(per_direction.mean())


def endpoint_mse(traj_set, ref_set):
    """(mean, std) of per-chain squared endpoint distance, paired by chain id"""
    if set(traj_set.chain_ids.tolist()) != set(ref_set.chain_ids.tolist()) or len(traj_set) != len(ref_set):
        raise PairingError('Sample sets must hold the same chains')
    a = traj_set.points[np.argsort(traj_set.chain_ids, kind='stable')]
    b = ref_set.points[np.argsort(ref_set.chain_ids, kind='stable')]
    errors = np.sum((a - b) ** 2, axis=1)
    return float(errors.mean()), float(errors.std())


def metric_summary(metric, value, n, n_proj=None, seed=None):
    return {'metric': metric, 'value': value, 'n': n, 'n_proj': n_proj, 'seed': seed}
