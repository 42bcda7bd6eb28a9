"""
CSV writers and readers for time series, field dumps, interfaces,
convergence tables and spectrum values.  Every file is written to a
temporary file next to its target and renamed into place.
"""
import logging
import os
import re

import numpy as np
from django.core.files.temp import NamedTemporaryFile

from chdg import dg
from chdg.exceptions import DumpFormatError
from chdg.mesh import build_uniform_mesh
from chdg.stepper import TimeSeriesRecord

logger = logging.getLogger(__name__)

FIELD_HEADER = '# chdg-field v1, n=%d, r=%d, field=%s, t=%s'
FIELD_HEADER_RE = re.compile(
    r'^# chdg-field v1, n=(?P<n>\d+), r=(?P<r>\d+), field=(?P<field>[UW]), t=(?P<t>\S+)$'
)
TIMESERIES = 'timeseries.csv'
INTERFACE = 'interface.csv'
CONVERGENCE = 'convergence.csv'
SPECTRUM = 'spectrum.csv'


def fmt(value):
    """
    17 significant digits for floats, blank for undefined values.
    """
    if value is None:
        return ''
    if isinstance(value, (int, np.integer)):
        return '%d' % value
    return '%.17g' % value


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with NamedTemporaryFile(mode='w', dir=directory, suffix='.tmp', delete=False) as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
        temp_name = f.name
    try:
        os.replace(temp_name, path)
    except OSError:
        os.unlink(temp_name)
        raise
    logger.debug('wrote %s', path)


def write_csv(path, columns, rows):
    lines = [','.join(columns)]
    lines.extend(','.join(fmt(v) for v in row) for row in rows)
    atomic_write(path, '\n'.join(lines) + '\n')


def timeseries_line(row):
    return ','.join(fmt(getattr(row, name)) for name in TimeSeriesRecord.columns)


def write_timeseries(path, record):
    lines = [','.join(TimeSeriesRecord.columns)]
    lines.extend(timeseries_line(row) for row in record)
    atomic_write(path, '\n'.join(lines) + '\n')


def field_dump_name(name, step):
    return 'field_%s_%06d.csv' % (name, step)


def write_field(path, field, name, time):
    space = field.space
    lines = [FIELD_HEADER % (space.mesh.n, space.degree, name, fmt(float(time)))]
    for index, values in enumerate(field.local):
        lines.append('%d,%s' % (index, ','.join(fmt(v) for v in values)))
    atomic_write(path, '\n'.join(lines) + '\n')


def read_field_dump(path):
    """
    Header values and local coefficients (cells, num_local) of a field dump.
    """
    with open(path) as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines:
        raise DumpFormatError('%s is empty' % path)
    match = FIELD_HEADER_RE.match(lines[0])
    if not match:
        raise DumpFormatError('%s: bad field header %r' % (path, lines[0]))
    header = {
        'n': int(match.group('n')),
        'r': int(match.group('r')),
        'field': match.group('field'),
        't': float(match.group('t')),
    }
    num_cells = 2 * header['n'] ** 2
    num_local = (header['r'] + 1) * (header['r'] + 2) // 2
    if len(lines) - 1 != num_cells:
        raise DumpFormatError('%s: expected %d cells, found %d'
                              % (path, num_cells, len(lines) - 1))
    coefficients = np.empty((num_cells, num_local))
    for number, line in enumerate(lines[1:]):
        parts = line.split(',')
        try:
            index = int(parts[0])
            values = [float(v) for v in parts[1:]]
        except ValueError:
            raise DumpFormatError('%s: malformed line %d' % (path, number + 2))
        if index != number or len(values) != num_local:
            raise DumpFormatError('%s: malformed line %d' % (path, number + 2))
        coefficients[index] = values
    return header, coefficients


def load_field(path):
    """
    Rebuild the space of a dump and return (header, DGField).
    """
    header, coefficients = read_field_dump(path)
    space = dg.DGSpace(build_uniform_mesh(header['n']), header['r'])
    return header, dg.DGField(space, coefficients)


class RunWriter(object):
    """
    Output sink of a simulation: keeps the time series and writes U and W
    dumps on request.  Rows recorded since the last dump are appended to
    the time series file at every dump and on close, so an aborted run
    leaves a complete file for the steps done.
    """

    def __init__(self, output_dir):
        self.output_dir = output_dir
        self.timeseries = TimeSeriesRecord()
        self.dumps = []
        self.flushed = None

    def path(self, name):
        return os.path.join(self.output_dir, name)

    def record(self, row):
        self.timeseries.append(row)

    def dump(self, state):
        for name, field in (('U', state.U), ('W', state.W)):
            path = self.path(field_dump_name(name, state.step))
            write_field(path, field, name, state.time)
            self.dumps.append(path)
        self.flush()

    def flush(self):
        path = self.path(TIMESERIES)
        if self.flushed is None:
            write_timeseries(path, self.timeseries)
        else:
            rows = self.timeseries.rows[self.flushed:]
            if rows:
                with open(path, 'a') as f:
                    f.write(''.join(timeseries_line(row) + '\n' for row in rows))
        self.flushed = len(self.timeseries)

    def close(self):
        self.flush()


def write_interface(path, polylines, distances=None):
    """
    One row per segment; ``distances`` holds per-segment distances for each
    polyline when a reference curve was given.
    """
    columns = ['time', 'segment', 'x0', 'y0', 'x1', 'y1']
    if distances is not None:
        columns.append('distance')
    rows = []
    for i, poly in enumerate(polylines):
        for j, segment in enumerate(poly.segments):
            row = [poly.time, j] + list(segment)
            if distances is not None:
                row.append(distances[i][j])
            rows.append(row)
    write_csv(path, columns, rows)


def write_convergence(path, report):
    write_csv(path, ('n', 'h', 'err_linf_l2', 'order_l2', 'err_l2_h1', 'order_h1'), (
        (row.n, row.h, row.err_linf_l2, row.order_l2, row.err_l2_h1, row.order_h1)
        for row in report
    ))


def write_spectrum(path, rows):
    write_csv(path, ('n', 'epsilon', 'lambda_min'), rows)
