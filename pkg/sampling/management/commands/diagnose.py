# sampling/management/commands/diagnose.py
from django.core.management.base import CommandError

from ... import diagnostics
from ...exceptions import ConfigError
from ...pfdiff import PFDiffConfig
from ...runner import run_chains
from ...solvers import reference_solve, seed_chains
from ..base import EXIT_DOMAIN, ExperimentCommand, parse_list

COLUMNS = diagnostics.TABLE_COLUMNS

KINDS = tuple(COLUMNS)


def _columns_help():
    return '; '.join(f"{kind}.csv ({', '.join(columns)})" for kind, columns in COLUMNS.items())


class Command(ExperimentCommand):
    help = f"Run one error diagnostic against the every-index reference. Writes {_columns_help()} and manifest.json."
    command_name = 'diagnose'
    positional = ('kind', 'config')

    def add_command_arguments(self, parser):
        parser.add_argument('kind', choices=KINDS)
        parser.add_argument('config', help='Experiment TOML file')
        parser.add_argument('--chains', type=int, default=None, help='Overrides [run] chains')
        parser.add_argument('--dt', default='0,1,2,5,10,20,50,100,200,500,900', help='mse-dt gaps')
        parser.add_argument('--trajectory', choices=['pfdiff', 'baseline', 'reference'], default='pfdiff',
                            help='truncation: which sampler to compare with the reference')
        parser.add_argument('--n-list', default='6,8,10,20', help='eta-sweep NFE budgets')
        parser.add_argument('--eta-list', default='0,0.5,1', help='eta-sweep eta values')
        parser.add_argument('--orders', default='1,2,3', help='convergence solver orders')
        parser.add_argument('--m-list', default='16,32,64,128', help='convergence step counts')

    def run(self, **options):
        experiment, seed = self.load(options)
        chains = self.chains(options, experiment)
        kind = options['kind']
        rows, nfe = getattr(self, f"diagnose_{kind.replace('-', '_')}")(experiment, seed, chains, options)

        replay, writer = self.open_run(options, experiment, seed)
        writer.write_csv(f"{kind}.csv", kind, COLUMNS[kind], rows)
        self.stdout.write(f"{kind}: {len(rows)} row(s)")
        self.finish(replay, writer, experiment=experiment, seed=seed, nfe=nfe,
                    summary={'kind': kind, 'chains': chains, 'rows': len(rows)})

    def diagnose_mse_dt(self, experiment, seed, chains, options):
        rows = diagnostics.mse_vs_dt(experiment.model, experiment.schedule, chains,
                                     parse_list(options['dt'], int), seed=seed, eta=experiment.phi.eta)
        return rows, None

    def _pfdiff_config(self, experiment):
        if experiment.pfdiff is None:
            raise ConfigError('This diagnostic needs [pfdiff] enabled = true')
        return experiment.pfdiff

    def diagnose_springboard(self, experiment, seed, chains, options):
        config = self._pfdiff_config(experiment)
        rows = diagnostics.springboard_vs_future(experiment.model, experiment.schedule, config, chains, seed=seed,
                                                 grid_kind=experiment.grid.kind, phi=experiment.phi)
        return rows, None

    def diagnose_truncation(self, experiment, seed, chains, options):
        source = options['trajectory']
        x_T, _, chain_ids = seed_chains(seed, chains, experiment.model.dim)
        reference = reference_solve(experiment.model, experiment.schedule, x_T, n_ref=experiment.n_ref,
                                    chain_ids=chain_ids)
        nfe = None
        if source == 'reference':
            trajectory = reference
        else:
            if source == 'pfdiff':
                self._pfdiff_config(experiment)
            result, points = run_chains(experiment, seed, chains, self.workers(options),
                                        use_pfdiff=source == 'pfdiff')
            trajectory = result.trajectory
            nfe = {'batches': result.nfe_batches, 'evals': result.nfe_evals, 'points': points}
        return diagnostics.accumulated_truncation(trajectory, reference), nfe

    def diagnose_planarity(self, experiment, seed, chains, options):
        x_T, _, chain_ids = seed_chains(seed, chains, experiment.model.dim)
        reference = reference_solve(experiment.model, experiment.schedule, x_T, n_ref=experiment.n_ref,
                                    chain_ids=chain_ids)
        return diagnostics.planarity_table(reference), None

    def diagnose_eta_sweep(self, experiment, seed, chains, options):
        if experiment.phi.family != 'ddim-eta':
            raise ConfigError('The eta sweep runs the ddim-eta family')
        base = experiment.pfdiff or PFDiffConfig()
        rows = diagnostics.eta_sweep(experiment.model, experiment.schedule, parse_list(options['n_list'], int),
                                     parse_list(options['eta_list']), config=base, n_chains=chains, seed=seed,
                                     grid_kind=experiment.grid.kind)
        return rows, None

    def diagnose_convergence(self, experiment, seed, chains, options):
        m_list = parse_list(options['m_list'], int)
        if len(m_list) < 2 or min(m_list) < 1:
            raise CommandError('--m-list needs at least two positive step counts', returncode=EXIT_DOMAIN)
        rows = []
        for order in parse_list(options['orders'], int):
            for row in diagnostics.solver_convergence(experiment.model, experiment.schedule, order, m_list,
                                                      n_chains=chains, seed=seed):
                rows.append({'order': order, **row})
        return rows, None
