# sampling/management/commands/metrics.py
import csv
from pathlib import Path

import numpy as np

from ...config import sha256_file
from ...exceptions import ConfigError, MetricError
from ...metrics import SampleSet, endpoint_mse, gaussian_w2, metric_summary, sliced_wasserstein
from ...score import MIXTURE_PRESETS, preset_mixture
from ..base import ExperimentCommand

METRICS = ('sw', 'w2', 'mse')


def read_sample_csv(path):
    """SampleSet from an endpoints CSV (chain_id, x_0..x_{D-1})"""
    try:
        with Path(path).open(newline='') as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != 'chain_id' or len(header) < 2:
                raise MetricError(f"{path}: expected a chain_id, x_0, ... header")
            rows = [row for row in reader if row]
    except OSError as exc:
        raise ConfigError(f"Cannot read samples {path}: {exc.strerror}") from exc
    try:
        chain_ids = [int(row[0]) for row in rows]
        points = np.array([[float(value) for value in row[1:]] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise MetricError(f"{path}: {exc}") from exc
    return SampleSet(points.reshape(len(rows), len(header) - 1), chain_ids, provenance={'path': str(path)})


def moments(sample_set):
    return sample_set.points.mean(axis=0), np.atleast_2d(np.cov(sample_set.points, rowvar=False))


class Command(ExperimentCommand):
    help = (
        'Score an endpoints CSV against a reference CSV or exact draws from a preset: '
        'sw (sliced Wasserstein), w2 (Gaussian W2 of the fitted moments) or mse (paired by chain_id). '
        'Writes summary.json (metric, value, n, n_proj, seed) and manifest.json.'
    )
    command_name = 'metrics'

    def add_command_arguments(self, parser):
        parser.add_argument('--samples', required=True, help='Endpoints CSV to score')
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--reference', help='Reference endpoints CSV')
        source.add_argument('--truth-preset', choices=sorted(MIXTURE_PRESETS), help='Draw the truth from q_0')
        parser.add_argument('--truth-n', type=int, default=None, help='Truth draws (default: as many as samples)')
        parser.add_argument('--metric', choices=METRICS, default='sw')
        parser.add_argument('--n-proj', type=int, default=128, help='sw projections')

    def run(self, **options):
        seed = 0 if options['seed'] is None else options['seed']
        samples = read_sample_csv(options['samples'])
        input_hashes = {'samples': sha256_file(options['samples'])}
        truth_mixture = None
        if options['reference']:
            truth = read_sample_csv(options['reference'])
            input_hashes['reference'] = sha256_file(options['reference'])
        else:
            truth_mixture = preset_mixture(options['truth_preset'])
            n = options['truth_n'] or len(samples)
            truth = SampleSet(truth_mixture.sample(n, np.random.default_rng(seed)),
                              provenance={'preset': options['truth_preset'], 'seed': seed})

        metric, n_proj = options['metric'], None
        if metric == 'sw':
            n_proj = options['n_proj']
            value = sliced_wasserstein(samples, truth, n_proj=n_proj, seed=seed)
        elif metric == 'w2':
            if truth_mixture is not None and truth_mixture.n_components == 1:
                truth_moments = (truth_mixture.means[0], truth_mixture.covariances[0])
            else:
                truth_moments = moments(truth)
            value = gaussian_w2(*moments(samples), *truth_moments)
        else:
            if truth_mixture is not None:
                raise MetricError('mse pairs chains by id; give --reference, not --truth-preset')
            value, spread = endpoint_mse(samples, truth)

        summary = metric_summary(metric, value, len(samples), n_proj=n_proj, seed=seed)
        if metric == 'mse':
            summary['std'] = spread
        self.stdout.write(f"{metric} = {value!r} (n={len(samples)})")

        replay, writer = self.open_run(options, seed=seed)
        writer.write_json('summary.json', 'metric-summary', summary)
        self.finish(replay, writer, seed=seed, summary=summary, input_hashes=input_hashes)
