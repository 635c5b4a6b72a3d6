# sampling/management/commands/prop1.py
from ...diagnostics import prop1_check, prop1_sweep
from ...exceptions import DiagnosticDomainError, PropertyFailure
from ..base import ExperimentCommand, parse_list

COLUMNS = ['n', 'lhs', 'rhs', 'holds']


class Command(ExperimentCommand):
    help = (
        'Check |(t-e)^n - (s-e)^n|/n! < |t-s|^n/n! for s < e < t and n = 2..nmax. '
        'A random sweep writes prop1.json (samples, checked, rejected, failed, counterexamples); '
        f"--tuple writes prop1.csv ({', '.join(COLUMNS)}). Exits 3 on any counterexample."
    )
    command_name = 'prop1'

    def add_command_arguments(self, parser):
        parser.add_argument('--samples', type=int, default=100000, help='Random (t_prev, t_cur, eps) tuples')
        parser.add_argument('--nmax', type=int, default=10, help='Highest derivative order checked')
        parser.add_argument('--tuple', default=None, help='Check one tuple t_prev,t_cur,eps instead')

    def run(self, **options):
        seed = 0 if options['seed'] is None else options['seed']
        if options['tuple']:
            values = parse_list(options['tuple'])
            if len(values) != 3:
                raise DiagnosticDomainError(f"--tuple takes t_prev,t_cur,eps, got {options['tuple']!r}")
            rows = prop1_check(*values, options['nmax'])
            failed = sum(not row['holds'] for row in rows)
            summary = {'tuple': values, 'n_max': options['nmax'], 'checked': 1, 'failed': failed}
            replay, writer = self.open_run(options, seed=seed)
            writer.write_csv('prop1.csv', 'prop1', COLUMNS, rows)
        else:
            summary = prop1_sweep(options['samples'], n_max=options['nmax'], seed=seed)
            failed = summary['failed']
            replay, writer = self.open_run(options, seed=seed)
            writer.write_json('prop1.json', 'prop1-summary', summary)

        self.finish(replay, writer, seed=seed, summary=summary)
        if failed:
            raise PropertyFailure(f"{failed} counterexample(s) to the coefficient bound")
        self.stdout.write(f"Coefficient bound holds on {summary['checked']} tuple(s), n = 2..{options['nmax']}")
