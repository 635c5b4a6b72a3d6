# sampling/management/commands/sample.py
from ...runner import run_chains
from ..base import ExperimentCommand


class Command(ExperimentCommand):
    help = (
        'Sample chains with the configured solver, PFDiff-wrapped when [pfdiff] is enabled. '
        'Writes endpoints.csv (chain_id, x_0..x_{D-1}), trajectory.csv with --trajectories '
        '(chain_id, step_index, t, x_0..x_{D-1}) and manifest.json.'
    )
    command_name = 'sample'
    positional = ('config',)

    def add_command_arguments(self, parser):
        parser.add_argument('config', help='Experiment TOML file')
        parser.add_argument('--chains', type=int, default=None, help='Overrides [run] chains')
        parser.add_argument('--trajectories', action='store_true', help='Also write full trajectories')

    def run(self, **options):
        experiment, seed = self.load(options)
        chains = self.chains(options, experiment)
        replay, writer = self.open_run(options, experiment, seed)

        result, nfe_points = run_chains(experiment, seed, chains, self.workers(options))
        writer.write_endpoints(result)
        if options['trajectories'] or experiment.config['run']['record_trajectories']:
            writer.write_trajectory(result.trajectory)

        label = experiment.pfdiff.label if experiment.pfdiff else f"{experiment.phi.family}-{experiment.phi.order}"
        self.stdout.write(
            f"{label} over {experiment.grid.M} grid intervals, {chains} chains: "
            f"nfe_batches={result.nfe_batches} nfe_evals={result.nfe_evals} nfe_points={nfe_points}"
        )
        self.finish(
            replay, writer, experiment=experiment, seed=seed,
            nfe={'batches': result.nfe_batches, 'evals': result.nfe_evals, 'points': nfe_points},
            summary={'chains': chains, 'label': label},
        )
