import numpy as np

from chdg import dg, operators
from chdg.exceptions import InterfaceError, UnknownTestCase
from chdg.interface import (
    EMPTY_INTERFACE, Circles, Ellipse, InterfacePolyline, ReferenceCurve,
    circle_sampler, ellipse_sampler, extract_zero_level_set, interface_distance,
    interpolate_in_time, make_initial, parse_shape,
)
from chdg.tests.base import ChdgTestCase


def loop_polyline(points, time=0.0):
    segments = np.concatenate([points, np.roll(points, -1, axis=0)], axis=1)
    return InterfacePolyline(time, segments, np.zeros(len(points), dtype=int))


def sorted_segments(polyline):
    s = polyline.segments.copy()
    # orient every segment from its lexicographically smaller end
    flip = (s[:, 0] > s[:, 2]) | ((s[:, 0] == s[:, 2]) & (s[:, 1] > s[:, 3]))
    s[flip] = s[flip][:, [2, 3, 0, 1]]
    return s[np.lexsort(s.T[::-1])]


class InitialConditionTestCase(ChdgTestCase):
    def testTwoCircles(self):
        u0 = make_initial(2, 0.1)
        self.assertAlmostEqual(float(u0(0.0, 0.0)), 0.0, delta=1e-15)

    def testFourCircles(self):
        u0 = make_initial(3, 0.05)
        self.assertAlmostEqual(float(u0.distance(0.3, 0.0)), -0.2, delta=1e-15)
        self.assertAlmostEqual(
            float(u0(0.3, 0.0)), np.tanh(-0.2 / (np.sqrt(2.0) * 0.05)), delta=1e-15,
        )

    def testEllipseVertex(self):
        u0 = make_initial(1, 0.1)
        self.assertEqual(float(u0.distance(0.6, 0.0)), 0.0)
        self.assertEqual(float(u0(0.6, 0.0)), 0.0)
        self.assertAlmostEqual(float(u0.distance(0.0, 0.2)), 0.0, delta=1e-12)

    def testBounded(self):
        x, y = np.meshgrid(np.linspace(-1, 1, 101), np.linspace(-1, 1, 101))
        for test_id in (1, 2, 3):
            self.assertTrue((np.abs(make_initial(test_id, 0.1)(x, y)) < 1.0).all())

    def testPositiveOutside(self):
        for test_id in (1, 2, 3):
            u0 = make_initial(test_id, 0.1)
            self.assertGreater(float(u0(0.95, 0.95)), 0.9)

    def testEllipseBruteForce(self):
        ellipse = Ellipse(0.6, 0.2)
        theta = np.linspace(0.0, 2.0 * np.pi, 200000, endpoint=False)
        curve = np.column_stack([0.6 * np.cos(theta), 0.2 * np.sin(theta)])
        points = self.rng.uniform(-1.0, 1.0, size=(40, 2))
        distances = ellipse.distance(points[:, 0], points[:, 1])
        for point, distance in zip(points, distances):
            nearest = np.linalg.norm(curve - point, axis=1).min()
            self.assertAlmostEqual(abs(distance), nearest, delta=1e-5)
            inside = (point[0] / 0.6) ** 2 + (point[1] / 0.2) ** 2 < 1.0
            self.assertEqual(distance < 0, inside)

    def testEllipseGradient(self):
        ellipse = Ellipse(0.6, 0.2)
        points = np.array([[0.9, 0.3], [-0.2, 0.7], [0.1, -0.5], [-0.8, -0.8]])
        gx, gy = ellipse.gradient(points[:, 0], points[:, 1])
        step = 1e-6
        for (x, y), ex, ey in zip(points, gx, gy):
            fx = (ellipse.distance(x + step, y) - ellipse.distance(x - step, y)) / (2 * step)
            fy = (ellipse.distance(x, y + step) - ellipse.distance(x, y - step)) / (2 * step)
            self.assertAlmostEqual(float(fx), ex, delta=1e-6)
            self.assertAlmostEqual(float(fy), ey, delta=1e-6)

    def testPerimeter(self):
        self.assertAlmostEqual(Ellipse(1.0, 1.0).perimeter, 2.0 * np.pi, delta=1e-12)
        self.assertAlmostEqual(Ellipse(0.2, 0.6).perimeter, Ellipse(0.6, 0.2).perimeter, delta=1e-12)

    def testUnknown(self):
        self.assertRaises(UnknownTestCase, make_initial, 4, 0.1)
        self.assertRaises(UnknownTestCase, make_initial, 'x', 0.1)
        self.assertRaises(UnknownTestCase, make_initial, 'custom', 0.1)
        self.assertRaises(ValueError, make_initial, 1, 0.0)

    def testCustom(self):
        u0 = make_initial('custom', 0.1, 'circle:0.1,0,0.5')
        self.assertAlmostEqual(float(u0.distance(0.6, 0.0)), 0.0, delta=1e-15)
        self.assertEqual(u0.test_id, 'custom')

    def testParseShape(self):
        self.assertEqual(repr(parse_shape('ellipse:0.6,0.2')), 'ellipse:0.6,0.2')
        self.assertEqual(repr(parse_shape('circles:0,0,0.3;0.5,0,0.2')), 'circles:0,0,0.3;0.5,0,0.2')
        for text in ('square:1', 'ellipse:1', 'circle:0,0,-1', 'circles:', 'ellipse:a,b'):
            self.assertRaises(InterfaceError, parse_shape, text)


class ExtractionTestCase(ChdgTestCase):
    def testAllPositive(self):
        space = self.create_space(4, 1)
        polyline = extract_zero_level_set(dg.constant_field(space, 0.5), 0.0)
        self.assertEqual(len(polyline), 0)

    def testLinearField(self):
        for n in (3, 4, 8):
            space = self.create_space(n, 1)
            field = dg.interpolate(space, lambda x, y: x, continuous=True)
            polyline = extract_zero_level_set(field, 0.5)
            self.assertEqual(polyline.time, 0.5)
            self.assertAlmostEqual(polyline.length, 2.0, delta=1e-12)
            self.assertLessEqual(np.abs(polyline.segments[:, [0, 2]]).max(), 1e-12)

    def testSignFlip(self):
        space = self.create_space(6, 1)
        field = self.continuous_field(space)
        flipped = field.with_coefficients(-field.coefficients, dg.CONTINUOUS)
        self.assertAllClose(
            sorted_segments(extract_zero_level_set(field)),
            sorted_segments(extract_zero_level_set(flipped)),
            atol=1e-15,
        )

    def testRequiresContinuousLinear(self):
        self.assertRaises(
            InterfaceError, extract_zero_level_set, self.random_field(self.create_space(2, 1)),
        )
        space = self.create_space(2, 2)
        self.assertRaises(
            InterfaceError, extract_zero_level_set, dg.interpolate(space, lambda x, y: x, True),
        )

    def testEllipse(self):
        u0 = make_initial(1, 0.05)
        space = self.create_space(40, 1)
        U0 = operators.project_initial(space, u0)
        polyline = extract_zero_level_set(U0)
        result = interface_distance(polyline, Ellipse(0.6, 0.2))
        self.assertTrue(result)
        self.assertLessEqual(result.distance, 2 * space.mesh.h)
        self.assertEqual(len(result.per_segment), len(polyline))

    def testLengthConvergence(self):
        u0 = make_initial(1, 0.05)
        perimeter = Ellipse(0.6, 0.2).perimeter
        errors = []
        for n in (20, 40, 80):
            space = self.create_space(n, 1)
            polyline = extract_zero_level_set(dg.interpolate(space, u0, continuous=True))
            errors.append(abs(polyline.length - perimeter) / perimeter)
        self.assertLess(errors[1], errors[0])
        self.assertLess(errors[2], errors[1])


class DistanceTestCase(ChdgTestCase):
    def testSameCurve(self):
        theta = np.linspace(0.0, 2.0 * np.pi, 1000, endpoint=False)
        polyline = loop_polyline(np.column_stack([np.cos(theta), np.sin(theta)]))
        result = interface_distance(polyline, circle_sampler(0.0, 0.0, 1.0, 4096))
        self.assertLessEqual(result.distance, 1e-3)
        self.assertAlmostEqual(result.accuracy, np.sin(np.pi / 4096), delta=1e-12)

    def testReferenceSamples(self):
        reference = ellipse_sampler(0.6, 0.2)
        polyline = loop_polyline(reference.points)
        result = interface_distance(polyline, reference)
        self.assertLessEqual(result.distance, reference.spacing)

    def testEmpty(self):
        polyline = InterfacePolyline(0.0, np.zeros((0, 4)), np.zeros(0, dtype=int))
        result = interface_distance(polyline, Ellipse(0.6, 0.2))
        self.assertIs(result, EMPTY_INTERFACE)
        self.assertFalse(result)
        self.assertIsNone(result.distance)

    def testTooFewSamples(self):
        polyline = loop_polyline(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        self.assertRaises(InterfaceError, interface_distance, polyline, circle_sampler(0, 0, 1, 100))
        self.assertRaises(InterfaceError, interface_distance, polyline, Ellipse(0.6, 0.2), samples=1000)

    def testCoveredArcs(self):
        shape = Circles([(-0.3, 0.0, 0.3), (0.3, 0.0, 0.25)])
        reference = shape.sample()
        self.assertIsInstance(reference, ReferenceCurve)
        distances = shape.distance(reference.points[:, 0], reference.points[:, 1])
        self.assertLessEqual(np.abs(distances).max(), 1e-12)


class TimeInterpolationTestCase(ChdgTestCase):
    def testBlend(self):
        space = self.create_space(2, 1)
        first, second = self.random_field(space), self.random_field(space)
        dumps = [(0.0, first), (1.0, second)]
        middle = interpolate_in_time(dumps, 0.25)
        self.assertAllClose(
            middle.coefficients, 0.75 * first.coefficients + 0.25 * second.coefficients,
            atol=1e-15,
        )
        self.assertAllClose(interpolate_in_time(dumps, 1.0).coefficients, second.coefficients)
        self.assertAllClose(interpolate_in_time(dumps, 0.0).coefficients, first.coefficients)

    def testOutOfRange(self):
        space = self.create_space(2, 1)
        dumps = [(0.0, dg.zero_field(space)), (1.0, dg.zero_field(space))]
        self.assertRaises(InterfaceError, interpolate_in_time, dumps, 1.5)
        self.assertRaises(InterfaceError, interpolate_in_time, [], 0.0)
        self.assertRaises(InterfaceError, interpolate_in_time, dumps[::-1], 0.5)
