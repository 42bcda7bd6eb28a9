import os

from django.core.management.base import BaseCommand

from chdg.decorators import exit_on_error
from chdg.interface import (
    DEFAULT_REFERENCE_SAMPLES, extract_zero_level_set, interface_distance,
    parse_shape,
)
from chdg.operators import node_average
from chdg.output import INTERFACE, fmt, load_field, write_interface


class Command(BaseCommand):
    help = "Extract the zero level set of a field dump and measure it against a reference curve"
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('dump', help='field dump written by the run command')
        parser.add_argument('--reference', help='reference shape, e.g. ellipse:0.6,0.2')
        parser.add_argument(
            '--samples', type=int, default=DEFAULT_REFERENCE_SAMPLES,
            help='reference curve samples (at least 2048)',
        )
        parser.add_argument('--out', default='output', help='output directory')

    @exit_on_error()
    def handle(self, *args, **options):
        reference = parse_shape(options['reference']) if options.get('reference') else None
        header, field = load_field(options['dump'])
        averaged = node_average(field.space, field)
        polyline = extract_zero_level_set(averaged, header['t'])
        distances = None
        if reference is not None:
            measured = interface_distance(polyline, reference, options['samples'])
            if measured:
                distances = [measured.per_segment]
                self.stdout.write('distance %s accuracy %s h %s' % (
                    fmt(measured.distance), fmt(measured.accuracy),
                    fmt(field.space.mesh.h),
                ))
            else:
                self.stdout.write('empty interface')
        write_interface(os.path.join(options['out'], INTERFACE), [polyline], distances)
        self.stdout.write('%d segments, length %s' % (len(polyline), fmt(polyline.length)))
