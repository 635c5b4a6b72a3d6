# sampling/management/commands/search.py
import numpy as np
from django.core.management.base import CommandError

from ...exceptions import ConfigError
from ...pfdiff import PFDiffConfig, auto_search_kh, pfdiff_sample
from ...solvers import SolverStep, reference_solve, seed_chains
from ..base import EXIT_DOMAIN, ExperimentCommand

COLUMNS = ['k', 'h', 'mean', 'std', 'chosen']

ALL_CANDIDATES = '1_1,2_1,2_2,3_1,3_2,3_3'


def parse_candidates(text):
    """'1_1,2_1' -> [(1, 1), (2, 1)]"""
    pairs = []
    for item in text.split(','):
        if not item.strip():
            continue
        try:
            k, h = (int(part) for part in item.strip().split('_'))
        except ValueError:
            raise CommandError(f"Candidates look like k_h, got {item!r}", returncode=EXIT_DOMAIN) from None
        pairs.append((k, h))
    return pairs


class Command(ExperimentCommand):
    help = (
        'Pick PFDiff (k, h) by warmup endpoint error against the reference. '
        f"Writes search.csv ({', '.join(COLUMNS)}) and manifest.json."
    )
    command_name = 'search'
    positional = ('config',)

    def add_command_arguments(self, parser):
        parser.add_argument('config', help='Experiment TOML file')
        parser.add_argument('--candidates', default=ALL_CANDIDATES, help='Comma separated k_h pairs')
        parser.add_argument('--warmup', type=int, default=256, help='Warmup chains per candidate')
        parser.add_argument('--confirm-chains', type=int, default=0,
                            help='Re-score the choice on this many fresh chains (0 skips)')

    def run(self, **options):
        experiment, seed = self.load(options)
        if experiment.pfdiff is None:
            raise ConfigError('search needs [pfdiff] enabled = true')
        config, phi = experiment.pfdiff, experiment.phi
        report = auto_search_kh(
            parse_candidates(options['candidates']), experiment.model, experiment.schedule, config.N,
            warmup=options['warmup'], seed=seed, grid_kind=experiment.grid.kind, family=phi.family,
            p=phi.order, eta=phi.eta, n_ref=experiment.n_ref,
        )

        rows = [{**row, 'chosen': (row['k'], row['h']) == report.choice} for row in report.rows]
        self.stdout.write(f"{'k':>2} {'h':>2} {'mean':>14} {'std':>14}")
        for row in rows:
            marker = '  <' if row['chosen'] else ''
            self.stdout.write(f"{row['k']:>2} {row['h']:>2} {row['mean']:>14.6e} {row['std']:>14.6e}{marker}")
        k, h = report.choice
        self.stdout.write(f"Chosen: PFDiff-{k}_{h} (warmup {report.warmup} chains, seed {report.seed})")
        if report.tie_broken:
            tied = ', '.join(f"{a}_{b}" for a, b in report.tied)
            self.stdout.write(f"Tie between {tied}; kept the smallest (k, h)")

        summary = {'choice': [k, h], 'tied': [list(pair) for pair in report.tied]}
        if options['confirm_chains'] > 0:
            summary['confirm'] = self.confirm(experiment, config, phi, report.choice, seed, options['confirm_chains'])
            self.stdout.write(f"Confirmation on {options['confirm_chains']} chains: "
                              f"mean {summary['confirm']['mean']:.6e}")

        replay, writer = self.open_run(options, experiment, seed)
        writer.write_csv('search.csv', 'search', COLUMNS, rows)
        self.finish(replay, writer, experiment=experiment, seed=seed, summary=summary)

    def confirm(self, experiment, config, phi, choice, seed, chains):
        """Endpoint error of the chosen (k, h) on fresh chains"""
        k, h = choice
        chosen = PFDiffConfig(k=k, h=h, p=config.p, N=config.N, eta=config.eta)
        solver = SolverStep(experiment.schedule, phi.family, phi.order, phi.eta)
        # separate entropy pool: no confirmation chain repeats a warmup chain
        x_T, noise, chain_ids = seed_chains([seed, 1], chains, experiment.model.dim)
        target = reference_solve(experiment.model, experiment.schedule, x_T, n_ref=experiment.n_ref, record=[0],
                                 chain_ids=chain_ids).meta['endpoint']
        result = pfdiff_sample(chosen, solver, experiment.model, experiment.schedule,
                               chosen.make_grid(experiment.grid.kind, experiment.schedule.T), x_T, noise, chain_ids)
        errors = np.sum((result.x_0 - target) ** 2, axis=1)
        return {'chains': chains, 'mean': float(errors.mean()), 'std': float(errors.std())}
