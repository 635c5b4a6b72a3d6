# sampling/management/commands/pin_fixtures.py
from django.core.management.base import BaseCommand, CommandError

from ... import trends
from ...exceptions import PFDiffError
from ..base import EXIT_DOMAIN

SPRINGBOARD = 'springboard'


class Command(BaseCommand):
    help = (
        'Recompute the pre-registered trend runs and pin them under sampling/tests/fixtures/ '
        f"({', '.join(trends.TRENDS)}, {SPRINGBOARD}). Commit the result; the tests compare against it."
    )

    def add_arguments(self, parser):
        parser.add_argument('--only', action='append', choices=[*trends.TRENDS, SPRINGBOARD], default=None,
                            help='Pin just this fixture (repeatable)')
        parser.add_argument('--dir', default=None, help='Fixture directory (default: sampling/tests/fixtures)')

    def handle(self, *args, **options):
        names = options['only'] or [*trends.TRENDS, SPRINGBOARD]
        try:
            for name in names:
                if name == SPRINGBOARD:
                    path = trends.pin_springboard(options['dir'])
                else:
                    path = trends.write_fixture(trends.run_trend(name), options['dir'])
                self.stdout.write(f"{name}: {path}")
        except PFDiffError as exc:
            raise CommandError(str(exc), returncode=EXIT_DOMAIN) from exc
