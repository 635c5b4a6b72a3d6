# sampling/management/base.py
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from ..config import load_experiment
from ..exceptions import PFDiffError, PropertyFailure
from ..runner import RunWriter, options_key, record_run, run_directory

logger = logging.getLogger(__name__)

# Django's own options; never part of a replay
BASE_OPTIONS = {'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks',
                'stdout', 'stderr'}

EXIT_DOMAIN = 2
EXIT_PROPERTY = 3


def parse_list(text, cast=float):
    """'1,2,3' -> [1, 2, 3]"""
    try:
        return [cast(item) for item in str(text).split(',') if item.strip()]
    except ValueError as exc:
        raise CommandError(f"Cannot parse list {text!r}: {exc}", returncode=EXIT_DOMAIN) from exc


class ExperimentCommand(BaseCommand):
    """Shared flags, error mapping and run recording for the sampling commands"""
    positional = ()

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=None, help='Overrides [run] seed')
        parser.add_argument('--out', default=None, help='Output directory (default: PFDIFF_OUTPUT_DIR/<run>)')
        parser.add_argument('--workers', type=int, default=None, help='Chain worker threads (default: PFDIFF_WORKERS)')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        self.started_at = timezone.now()
        try:
            self.run(**options)
        except PropertyFailure as exc:
            raise CommandError(str(exc), returncode=EXIT_PROPERTY) from exc
        except PFDiffError as exc:
            raise CommandError(str(exc), returncode=EXIT_DOMAIN) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of ExperimentCommand must provide a run() method')

    def replay_options(self, options):
        """Positional args and flags needed to re-run this command"""
        args = [options[name] for name in self.positional]
        flags = {key: value for key, value in options.items()
                 if key not in BASE_OPTIONS and key not in self.positional and key != 'workers'}
        return {'args': args, 'options': flags}

    def load(self, options):
        experiment = load_experiment(options['config'])
        seed = experiment.seed if options['seed'] is None else options['seed']
        return experiment, seed

    def workers(self, options):
        workers = settings.PFDIFF_WORKERS if options['workers'] is None else options['workers']
        if workers < 1:
            raise CommandError(f"--workers must be at least 1, got {workers}", returncode=EXIT_DOMAIN)
        return workers

    def chains(self, options, experiment):
        chains = experiment.chains if options.get('chains') is None else options['chains']
        if chains < 1:
            raise CommandError(f"--chains must be at least 1, got {chains}", returncode=EXIT_DOMAIN)
        return chains

    def writer(self, options, key, seed):
        out = options['out'] or run_directory(self.command_name, key, seed)
        return RunWriter(out)

    def open_run(self, options, experiment=None, seed=None):
        replay = self.replay_options(options)
        key = experiment.config_hash if experiment else options_key(replay)
        if experiment:
            # same config under different flags gets its own directory
            key = options_key({'config': key, **replay['options']})
        return replay, self.writer(options, key, seed)

    def finish(self, replay, writer, **record):
        run, manifest = record_run(self.command_name, replay, writer, self.started_at, **record)
        self.stdout.write(f"Wrote {len(writer.outputs)} file(s) and {manifest.name} to {writer.out_dir}")
        return run
