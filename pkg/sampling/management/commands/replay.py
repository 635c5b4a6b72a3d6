# sampling/management/commands/replay.py
import json
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import BaseCommand, CommandError

from ...models import RunRecord
from ..base import EXIT_DOMAIN


class Command(BaseCommand):
    help = 'Re-run the command recorded in a manifest.json with its recorded arguments.'

    def add_arguments(self, parser):
        parser.add_argument('manifest', help='manifest.json written by an earlier run')
        parser.add_argument('--out', default=None, help='Write to this directory instead of the recorded one')

    def handle(self, *args, **options):
        try:
            manifest = json.loads(Path(options['manifest']).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CommandError(f"Cannot read manifest {options['manifest']}: {exc}", returncode=EXIT_DOMAIN) from exc

        command = manifest.get('command')
        if command not in dict(RunRecord.COMMANDS):
            raise CommandError(f"Manifest records unknown command {command!r}", returncode=EXIT_DOMAIN)
        recorded = manifest.get('options') or {}
        flags = {key: value for key, value in recorded.get('options', {}).items() if value is not None}
        flags['out'] = options['out'] or manifest.get('output_dir')

        self.stdout.write(f"Replaying {command} into {flags['out']}")
        call_command(command, *recorded.get('args', []), stdout=self.stdout._out, stderr=self.stderr._out, **flags)
