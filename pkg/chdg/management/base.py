from django.core.management.base import BaseCommand

from chdg.forms import parse_config


class ChdgCommand(BaseCommand):
    """
    Shared options of the solver commands: a JSON config file, repeatable
    ``--set key=value`` overrides, ``--strict`` validation and ``--out``.
    """
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--config', dest='config', help='JSON run configuration')
        parser.add_argument(
            '--set', dest='overrides', action='append', default=[],
            metavar='KEY=VALUE', help='override one configuration value',
        )
        parser.add_argument(
            '--strict', action='store_true', default=False,
            help='treat k > epsilon^3 with the implicit scheme as an error',
        )
        parser.add_argument('--out', dest='out', help='output directory')

    def load_config(self, options):
        overrides = list(options.get('overrides') or [])
        if options.get('out'):
            overrides.append('output_dir=%s' % options['out'])
        return parse_config(options.get('config'), overrides, options.get('strict', False))
