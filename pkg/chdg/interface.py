"""
Initial interfaces, zero level set extraction and interface distances.

Signed distances are positive outside the initial interface, so the initial
datum tanh(d / (sqrt(2) eps)) is close to -1 inside and +1 outside.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ellipe

from chdg import dg
from chdg.exceptions import InterfaceError, UnknownTestCase

logger = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-12
NEWTON_MAX_ITER = 100
ZERO_TOLERANCE = 1e-13
MIN_REFERENCE_SAMPLES = 2048
DEFAULT_REFERENCE_SAMPLES = 4096

# local vertex pairs scanned for sign changes
CELL_EDGES = ((0, 1), (1, 2), (2, 0))


class Ellipse(object):
    """
    Axis-aligned ellipse (x/a)^2 + (y/b)^2 = 1 centred at the origin.
    """

    def __init__(self, a, b):
        if not (a > 0 and b > 0):
            raise InterfaceError('ellipse semi-axes must be positive')
        self.a = float(a)
        self.b = float(b)

    def __repr__(self):
        return 'ellipse:%g,%g' % (self.a, self.b)

    def closest_points(self, x, y):
        """
        Closest points on the ellipse, by Newton's method on the
        Lagrange multiplier t of the projection problem.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.a < self.b:
            py, px = Ellipse(self.b, self.a).closest_points(y, x)
            return px, py
        a, b = self.a, self.b
        shape = np.broadcast(x, y).shape
        x = np.broadcast_to(x, shape).ravel()
        y = np.broadcast_to(y, shape).ravel()
        ax2 = (a * x) ** 2
        by2 = (b * y) ** 2
        px = np.empty_like(x)
        py = np.empty_like(y)

        on_axis = np.abs(y) <= 1e-14 * max(a, 1.0)
        # F(t) is convex and decreasing on (-b^2, inf) and F(t0) >= 0, so
        # Newton from t0 increases monotonically to the root
        t = -b * b + b * np.abs(y)
        active = ~on_axis
        for _ in range(NEWTON_MAX_ITER):
            if not active.any():
                break
            ta = t[active] + a * a
            tb = t[active] + b * b
            F = ax2[active] / ta ** 2 + by2[active] / tb ** 2 - 1.0
            dF = -2.0 * ax2[active] / ta ** 3 - 2.0 * by2[active] / tb ** 3
            delta = F / dF
            t[active] -= delta
            done = np.abs(delta) <= NEWTON_TOLERANCE * np.maximum(1.0, np.abs(t[active]))
            index = np.flatnonzero(active)
            active[index[done]] = False
        general = ~on_axis
        px[general] = a * a * x[general] / (t[general] + a * a)
        py[general] = b * b * y[general] / (t[general] + b * b)

        inner = on_axis & (np.abs(x) < (a * a - b * b) / a)
        px[inner] = a * a * x[inner] / (a * a - b * b)
        py[inner] = b * np.sqrt(np.clip(1.0 - (px[inner] / a) ** 2, 0.0, None))
        outer = on_axis & ~inner
        px[outer] = np.copysign(a, x[outer])
        py[outer] = 0.0
        return px.reshape(shape), py.reshape(shape)

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        px, py = self.closest_points(x, y)
        d = np.hypot(x - px, y - py)
        outside = (x / self.a) ** 2 + (y / self.b) ** 2 > 1.0
        return np.where(outside, d, -d)

    def gradient(self, x, y):
        px, py = self.closest_points(x, y)
        nx = px / self.a ** 2
        ny = py / self.b ** 2
        norm = np.hypot(nx, ny)
        return nx / norm, ny / norm

    def sample(self, count=DEFAULT_REFERENCE_SAMPLES):
        theta = np.linspace(0.0, 2.0 * np.pi, int(count), endpoint=False)
        points = np.column_stack([self.a * np.cos(theta), self.b * np.sin(theta)])
        return ReferenceCurve.from_loops([points])

    @property
    def perimeter(self):
        major, minor = max(self.a, self.b), min(self.a, self.b)
        return float(4.0 * major * ellipe(1.0 - (minor / major) ** 2))


class Circles(object):
    """
    Union of discs; the signed distance is the minimum over the circles.
    """

    def __init__(self, circles):
        circles = [tuple(float(v) for v in c) for c in circles]
        if not circles:
            raise InterfaceError('at least one circle is required')
        for _, _, r in circles:
            if not r > 0:
                raise InterfaceError('circle radius must be positive')
        self.circles = circles

    def __repr__(self):
        if len(self.circles) == 1:
            return 'circle:%g,%g,%g' % self.circles[0]
        return 'circles:' + ';'.join('%g,%g,%g' % c for c in self.circles)

    def _distances(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.stack([np.hypot(x - cx, y - cy) - r for cx, cy, r in self.circles])

    def distance(self, x, y):
        return self._distances(x, y).min(axis=0)

    def gradient(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        nearest = self._distances(x, y).argmin(axis=0)
        centers = np.array([c[:2] for c in self.circles])
        dx = x - centers[nearest, 0]
        dy = y - centers[nearest, 1]
        norm = np.hypot(dx, dy)
        norm = np.where(norm > 0, norm, 1.0)
        return dx / norm, dy / norm

    def sample(self, count=DEFAULT_REFERENCE_SAMPLES):
        """
        Samples of the union boundary; arcs swallowed by other discs are
        dropped.
        """
        loops = []
        per_circle = max(int(count) // len(self.circles), 3)
        for index, (cx, cy, r) in enumerate(self.circles):
            theta = np.linspace(0.0, 2.0 * np.pi, per_circle, endpoint=False)
            points = np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])
            others = [c for i, c in enumerate(self.circles) if i != index]
            if others:
                keep = Circles(others).distance(points[:, 0], points[:, 1]) >= 0
                points = points[keep]
            if len(points):
                loops.append(points)
        return ReferenceCurve.from_loops(loops)


def parse_shape(text):
    """
    Parse ``ellipse:a,b``, ``circle:x,y,r`` or ``circles:x,y,r;x,y,r;...``.
    """
    kind, _, rest = str(text).strip().partition(':')
    try:
        if kind == 'ellipse':
            a, b = (float(v) for v in rest.split(','))
            return Ellipse(a, b)
        if kind == 'circle':
            cx, cy, r = (float(v) for v in rest.split(','))
            return Circles([(cx, cy, r)])
        if kind == 'circles':
            return Circles([
                [float(v) for v in item.split(',')]
                for item in rest.split(';') if item.strip()
            ])
    except ValueError as e:
        raise InterfaceError('malformed shape %r: %s' % (text, e))
    raise InterfaceError('unknown shape %r' % (text,))


TEST_SHAPES = {
    1: Ellipse(0.6, 0.2),
    2: Circles([(-0.3, 0.0, 0.3), (0.3, 0.0, 0.25)]),
    3: Circles([(0.3, 0.0, 0.2), (-0.3, 0.0, 0.2), (0.0, 0.3, 0.2), (0.0, -0.3, 0.2)]),
}


@dataclass(frozen=True, eq=False)
class InitialCondition:
    test_id: object
    epsilon: float
    shape: object

    def distance(self, x, y):
        return self.shape.distance(x, y)

    def __call__(self, x, y):
        return np.tanh(self.distance(x, y) / (np.sqrt(2.0) * self.epsilon))

    def gradient(self, x, y):
        scale = np.sqrt(2.0) * self.epsilon
        d = self.distance(x, y)
        factor = (1.0 - np.tanh(d / scale) ** 2) / scale
        gx, gy = self.shape.gradient(x, y)
        return factor * gx, factor * gy


def make_initial(test_id, epsilon, shape=None):
    """
    Initial datum of test 1 (ellipse), 2 (two circles), 3 (four circles) or
    'custom' with a shape string or object.
    """
    if not epsilon > 0:
        raise ValueError('epsilon must be positive, got %r' % (epsilon,))
    if test_id == 'custom':
        if shape is None:
            raise UnknownTestCase('custom test case needs an interface shape')
        if isinstance(shape, str):
            shape = parse_shape(shape)
        return InitialCondition('custom', float(epsilon), shape)
    try:
        key = int(test_id)
    except (TypeError, ValueError):
        key = None
    if key not in TEST_SHAPES or str(test_id) != str(key):
        raise UnknownTestCase('unknown test case %r' % (test_id,))
    return InitialCondition(key, float(epsilon), TEST_SHAPES[key])


@dataclass(frozen=True, eq=False)
class InterfacePolyline:
    time: float
    segments: np.ndarray
    cells: np.ndarray

    def __len__(self):
        return len(self.segments)

    @cached_property
    def segment_lengths(self):
        s = self.segments
        return np.hypot(s[:, 2] - s[:, 0], s[:, 3] - s[:, 1])

    @property
    def length(self):
        return float(self.segment_lengths.sum())

    def sample_points(self):
        """
        Endpoints and midpoints of all segments, (3 * S, 2).
        """
        s = self.segments
        start, end = s[:, 0:2], s[:, 2:4]
        return np.concatenate([start, 0.5 * (start + end), end])


def extract_zero_level_set(field, time=0.0):
    """
    Chords of the zero set of a continuous piecewise linear field, at most
    one per cell.  Nodal values within 1e-13 of zero (relative) are pushed
    to a tiny positive value first, and the degenerate chords this leaves
    at shared vertices are dropped.
    """
    space = field.space
    if space.degree != 1:
        raise InterfaceError('level sets are extracted from piecewise linear fields only')
    if field.tag != dg.CONTINUOUS:
        raise InterfaceError('extract from a continuous field; node-average the DG field first')
    values = field.local[:, :3].copy()
    scale = float(np.abs(values).max()) or 1.0
    values[np.abs(values) <= ZERO_TOLERANCE * scale] = np.finfo(float).eps * scale
    vertices = space.mesh.cell_vertices

    positive = values > 0
    cut = np.flatnonzero(positive.any(axis=1) & ~positive.all(axis=1))
    crossings = []
    flags = []
    for i, j in CELL_EDGES:
        vi, vj = values[cut, i], values[cut, j]
        flags.append(positive[cut, i] != positive[cut, j])
        with np.errstate(divide='ignore', invalid='ignore'):
            s = np.where(flags[-1], vi / (vi - vj), 0.0)
        crossings.append(vertices[cut, i] + s[:, None] * (vertices[cut, j] - vertices[cut, i]))
    flags = np.stack(flags, axis=1)
    crossings = np.stack(crossings, axis=1)
    # exactly two edges change sign in every cut cell
    order = np.argsort(~flags, axis=1, kind='stable')[:, :2]
    rows = np.arange(len(cut))
    start = crossings[rows, order[:, 0]]
    end = crossings[rows, order[:, 1]]
    segments = np.concatenate([start, end], axis=1)

    lengths = np.hypot(segments[:, 2] - segments[:, 0], segments[:, 3] - segments[:, 1])
    keep = lengths > 1e-12 * space.mesh.h
    logger.debug('zero level set at t=%g: %d segments in %d cut cells',
                 time, keep.sum(), len(cut))
    return InterfacePolyline(
        time=float(time),
        segments=segments[keep].reshape(-1, 4),
        cells=cut[keep],
    )


@dataclass(frozen=True, eq=False)
class ReferenceCurve:
    """
    Closed sampled curve(s); ``successors`` links every sample to the next
    one on its loop.
    """
    points: np.ndarray
    successors: np.ndarray

    @classmethod
    def from_loops(cls, loops):
        points, successors, offset = [], [], 0
        for loop in loops:
            count = len(loop)
            points.append(np.asarray(loop, dtype=float))
            successors.append(offset + (np.arange(count) + 1) % count)
            offset += count
        return cls(np.concatenate(points), np.concatenate(successors))

    def __len__(self):
        return len(self.points)

    @cached_property
    def predecessors(self):
        result = np.empty_like(self.successors)
        result[self.successors] = np.arange(len(self.successors))
        return result

    @cached_property
    def spacing(self):
        return float(np.linalg.norm(
            self.points[self.successors] - self.points, axis=1,
        ).max())


def ellipse_sampler(a, b, count=DEFAULT_REFERENCE_SAMPLES):
    return Ellipse(a, b).sample(count)


def circle_sampler(x, y, r, count=DEFAULT_REFERENCE_SAMPLES):
    return Circles([(x, y, r)]).sample(count)


@dataclass(frozen=True)
class InterfaceDistance:
    distance: float
    accuracy: float
    per_segment: tuple = ()


class EmptyInterface(object):
    """
    Result of measuring a polyline without segments.
    """
    distance = None
    accuracy = None
    per_segment = ()

    def __bool__(self):
        return False

    def __repr__(self):
        return 'EmptyInterface'


EMPTY_INTERFACE = EmptyInterface()


def _chord_distances(points, start, end):
    direction = end - start
    length2 = np.einsum('ij,ij->i', direction, direction)
    safe = np.where(length2 > 0, length2, 1.0)
    s = np.clip(np.einsum('ij,ij->i', points - start, direction) / safe, 0.0, 1.0)
    return np.linalg.norm(points - (start + s[:, None] * direction), axis=1)


def interface_distance(polyline, reference, samples=DEFAULT_REFERENCE_SAMPLES):
    """
    One-sided distance sup_{x in polyline} dist(x, reference), measured at
    segment endpoints and midpoints.  The nearest reference sample is
    refined by projecting onto its two neighbouring chords; the reported
    accuracy is half the sample spacing.
    """
    if not isinstance(reference, ReferenceCurve):
        reference = reference.sample(samples)
    if len(reference) < MIN_REFERENCE_SAMPLES:
        raise InterfaceError('reference curve needs at least %d samples, got %d'
                             % (MIN_REFERENCE_SAMPLES, len(reference)))
    if not len(polyline):
        return EMPTY_INTERFACE
    points = polyline.sample_points()
    nearest_distance, nearest = cKDTree(reference.points).query(points)
    ref = reference.points
    forward = _chord_distances(points, ref[nearest], ref[reference.successors[nearest]])
    backward = _chord_distances(points, ref[reference.predecessors[nearest]], ref[nearest])
    distances = np.minimum(nearest_distance, np.minimum(forward, backward))
    per_segment = distances.reshape(3, -1).max(axis=0)
    return InterfaceDistance(
        distance=float(per_segment.max()),
        accuracy=0.5 * reference.spacing,
        per_segment=tuple(per_segment),
    )


def interpolate_in_time(dumps, time):
    """
    Linear blend of the coefficient vectors of the two stored fields
    bracketing ``time``; ``dumps`` is a time-sorted sequence of
    (time, DGField) pairs on one space.
    """
    if not dumps:
        raise InterfaceError('no stored fields to interpolate')
    times = np.array([t for t, _ in dumps])
    if np.any(np.diff(times) <= 0):
        raise InterfaceError('stored fields must have increasing times')
    if time < times[0] or time > times[-1]:
        raise InterfaceError('time %g outside stored range [%g, %g]'
                             % (time, times[0], times[-1]))
    upper = min(int(np.searchsorted(times, time, side='left')), len(times) - 1)
    if times[upper] == time or upper == 0:
        t, field = dumps[upper]
        return field.copy()
    (t0, f0), (t1, f1) = dumps[upper - 1], dumps[upper]
    theta = (time - t0) / (t1 - t0)
    return f0.with_coefficients(
        (1.0 - theta) * f0.coefficients + theta * f1.coefficients, tag=f0.tag,
    )
