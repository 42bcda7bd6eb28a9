import numpy as np
from scipy import linalg, optimize

from chdg import dg, diagnostics, operators, stepper
from chdg.exceptions import ConditionViolated, ConfigError
from chdg.interface import extract_zero_level_set, make_initial
from chdg.tests.base import ChdgTestCase


class GronwallTestCase(ChdgTestCase):
    def testTrivial(self):
        data = diagnostics.GronwallInput(S1=0.5, b=(0.0,) * 6, k=(0.0,) * 6, p=2.0)
        self.assertEqual(data.length, 7)
        self.assertAllClose(diagnostics.gronwall_bound(data), np.full(6, 0.5), atol=1e-15)

    def testDominance(self):
        L = 10
        b, k, p = np.full(L - 1, 0.1), np.full(L - 1, 0.01), 3.0
        data = diagnostics.GronwallInput(S1=0.01, b=tuple(b), k=tuple(k), p=p)
        bound = diagnostics.gronwall_bound(data)
        self.assertEqual(len(bound), L - 1)
        violations = 0
        for _ in range(10000):
            S = [0.01]
            for l in range(L - 1):
                growth = b[l] * S[-1] + k[l] * S[-1] ** p
                S.append(S[-1] + self.rng.uniform() * growth)
            violations += int((np.array(S[1:]) > bound * (1 + 1e-12)).any())
        self.assertEqual(violations, 0)

    def testViolation(self):
        data = diagnostics.GronwallInput(S1=1.0, b=(0.0,) * 6, k=(0.3,) * 6, p=2.0)
        with self.assertRaises(ConditionViolated) as cm:
            diagnostics.gronwall_bound(data)
        self.assertEqual(cm.exception.index, 5)

    def testValidation(self):
        for kwargs in (
            {'S1': 0.0, 'b': (0.0,), 'k': (0.0,), 'p': 2.0},
            {'S1': 1.0, 'b': (0.0,), 'k': (0.0,), 'p': 1.0},
            {'S1': 1.0, 'b': (0.0, 0.0), 'k': (0.0,), 'p': 2.0},
            {'S1': 1.0, 'b': (-0.1,), 'k': (0.0,), 'p': 2.0},
        ):
            self.assertRaises(ValueError, diagnostics.GronwallInput, **kwargs)


class ConvergenceTestCase(ChdgTestCase):
    def testCheckNested(self):
        self.assertEqual(diagnostics.check_nested((5, 10, 20), 40), [5, 10, 20])
        self.assertRaises(ConfigError, diagnostics.check_nested, (5, 8), None)
        self.assertRaises(ConfigError, diagnostics.check_nested, (10, 5), None)
        self.assertRaises(ConfigError, diagnostics.check_nested, (5, 10), 30)
        self.assertRaises(ConfigError, diagnostics.check_nested, (), None)

    def testMeshIndependent(self):
        params = stepper.ModelParams(epsilon=0.1, k=1e-5, T=2e-5)
        report = diagnostics.convergence_study(
            params, lambda x, y: 1.0 + 0 * x, (2, 4), 8, workers=2,
        )
        self.assertEqual(len(report), 2)
        for row in report:
            self.assertLessEqual(row.err_linf_l2, 1e-13)
            self.assertLessEqual(row.err_l2_h1, 1e-13)
            self.assertIsNone(row.order_l2)
            self.assertIsNone(row.order_h1)
        self.assertEqual(report.metadata['reference_n'], 8)

    def testDecreasing(self):
        params = stepper.ModelParams(epsilon=0.2, k=1e-5, T=2e-5)
        report = diagnostics.convergence_study(params, make_initial(2, 0.2), (4, 8), 16)
        first, second = report.rows
        self.assertLess(second.err_linf_l2, first.err_linf_l2)
        self.assertLess(second.err_l2_h1, first.err_l2_h1)
        self.assertIsNotNone(report.final.order_l2)
        self.assertEqual(report.final.n, 8)

    def testNestedEvaluator(self):
        coarse, fine = self.create_space(3, 1), self.create_space(6, 1)
        u = dg.interpolate(coarse, lambda x, y: x * y)
        evaluator = diagnostics.NestedEvaluator(coarse, fine)
        values = dg.field_values(u, *coarse.mesh.locate(fine.node_coordinates))
        same = dg.DGField(fine, values.ravel())
        l2, h1 = evaluator.difference_norms(u, same)
        self.assertLessEqual(l2, 1e-13)
        self.assertLessEqual(h1, 1e-12)

    def testProjectionRates(self):
        report = diagnostics.projection_study(
            lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y),
            lambda x, y: (-np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
                          -np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)),
            (4, 8, 16),
        )
        self.assertGreaterEqual(report.final.order_l2, 1.8)
        self.assertGreaterEqual(report.final.order_h1, 0.9)

    def testProjectionLinear(self):
        report = diagnostics.projection_study(
            lambda x, y: x - 2 * y, lambda x, y: (np.ones_like(x), -2 * np.ones_like(y)),
            (2, 4),
        )
        for row in report:
            self.assertLessEqual(row.err_l2_h1, 1e-10)


class SpectrumTestCase(ChdgTestCase):
    def setUp(self):
        super().setUp()
        self.space = self.create_space(4, 1)
        self.solver = operators.InverseLaplacianSolver(self.space, 10.0)
        self.U = self.random_field(self.space)

    def rayleigh_quotient(self, phi, fprime, epsilon=0.1):
        numerator, _ = diagnostics.spectrum_numerator(self.U, epsilon, self.solver.sipg, fprime)
        return (phi @ numerator @ phi) / operators.minus1_inner(self.solver, phi, phi)

    def testPositiveNumerator(self):
        value = diagnostics.spectrum_estimate(self.U, 0.1, self.solver, fprime=1.0)
        self.assertGreaterEqual(value, -1e-8)

    def testRayleighQuotients(self):
        value = diagnostics.spectrum_estimate(self.U, 0.1, self.solver, fprime=-1.0)
        for _ in range(100):
            phi = self.mean_zero_field(self.space, self.solver.mass).coefficients
            self.assertGreaterEqual(self.rayleigh_quotient(phi, -1.0), value - 1e-8)

    def testRandomRestarts(self):
        value = diagnostics.spectrum_estimate(self.U, 0.1, self.solver, fprime=-1.0)
        numerator, _ = diagnostics.spectrum_numerator(self.U, 0.1, self.solver.sipg, -1.0)
        numerator = numerator.toarray()
        gram = operators.minus1_gram(self.solver)
        m = self.solver.constant_load
        # mean-zero coordinates from the oblique projector I - 1 m^T / (m . 1)
        projector = np.eye(len(m)) - np.outer(np.ones(len(m)), m) / m.sum()
        basis = linalg.qr(projector, mode='economic')[0][:, :len(m) - 1]
        left, right = basis.T @ numerator @ basis, basis.T @ gram @ basis

        def quotient(c):
            top, bottom = c @ left @ c, c @ right @ c
            return top / bottom, 2 * (left @ c - top / bottom * (right @ c)) / bottom

        best = np.inf
        for _ in range(5):
            start = self.rng.standard_normal(len(m) - 1)
            result = optimize.minimize(
                quotient, start, jac=True, method='BFGS', options={'gtol': 1e-12, 'maxiter': 20000},
            )
            best = min(best, result.fun)
        self.assertAlmostEqual(best, value, delta=1e-6 * max(1.0, abs(value)))

    def testPenaltyMonotone(self):
        values = [
            diagnostics.spectrum_estimate(
                self.U, 0.1, self.solver, sipg=dg.assemble_sipg(self.space, sigma0),
            )
            for sigma0 in (10.0, 20.0, 40.0)
        ]
        self.assertLessEqual(values[0], values[1] + 1e-9)
        self.assertLessEqual(values[1], values[2] + 1e-9)

    def testSparsePathMatchesDense(self):
        params = stepper.ModelParams(epsilon=0.1, k=1e-5, T=0.0)
        space = self.create_space(5, 1)
        U, solver = diagnostics.spectrum_snapshot(params, space, make_initial(1, 0.1))
        dense = diagnostics.spectrum_estimate(U, 0.1, solver)
        iterative = diagnostics.spectrum_estimate(U, 0.1, solver, dense_limit=0)
        self.assertAlmostEqual(iterative, dense, delta=1e-6 * max(1.0, abs(dense)))

    def testSparsePathPositiveNumerator(self):
        dense = diagnostics.spectrum_estimate(self.U, 0.1, self.solver, fprime=1.0)
        iterative = diagnostics.spectrum_estimate(self.U, 0.1, self.solver, fprime=1.0, dense_limit=0)
        self.assertGreaterEqual(iterative, -1e-8)
        self.assertAlmostEqual(iterative, dense, delta=1e-6 * max(1.0, abs(dense)))

    def testLowerBound(self):
        _, weights = diagnostics.spectrum_numerator(self.U, 0.1, self.solver.sipg, -1.0)
        bound = diagnostics.spectrum_lower_bound(self.solver, weights, 0.1)
        self.assertAlmostEqual(bound, -(1.0 - 0.1 ** 3) ** 2 / 0.1 ** 2 / 0.4, delta=1e-9)
        value = diagnostics.spectrum_estimate(self.U, 0.1, self.solver, fprime=-1.0)
        self.assertGreaterEqual(value, bound - 1e-8)

    def testLowerBoundOtherPenalty(self):
        sipg = dg.assemble_sipg(self.space, 20.0)
        _, weights = diagnostics.spectrum_numerator(self.U, 0.1, sipg, -1.0)
        bound = diagnostics.spectrum_lower_bound(self.solver, weights, 0.1, own_form=False)
        top = linalg.eigh(
            self.solver.sipg.toarray(), self.solver.mass.toarray(), eigvals_only=True,
        )[-1]
        self.assertAlmostEqual(bound, -(1.0 - 0.1 ** 3) / 0.1 * top, delta=1e-6 * top)
        value = diagnostics.spectrum_estimate(self.U, 0.1, self.solver, fprime=-1.0, sipg=sipg)
        self.assertGreaterEqual(value, bound - 1e-8)

    def testNonNegativeWeightsBound(self):
        _, weights = diagnostics.spectrum_numerator(self.U, 0.1, self.solver.sipg, 1.0)
        self.assertEqual(diagnostics.spectrum_lower_bound(self.solver, weights, 0.1), 0.0)

    def testSnapshotIsEllipticProjection(self):
        params = stepper.ModelParams(epsilon=0.1, k=1e-5, T=0.0)
        space = self.create_space(4, 1)
        initial = make_initial(1, 0.1)
        U, solver = diagnostics.spectrum_snapshot(params, space, initial)
        expected = operators.elliptic_projection(space, initial, initial.gradient, params.sigma0)
        self.assertAllClose(U.coefficients, expected.coefficients, atol=1e-10)
        self.assertIs(solver.space, space)

    def testLaterSnapshot(self):
        params = stepper.ModelParams(epsilon=0.1, k=1e-5, T=1.0)
        space = self.create_space(4, 1)
        initial = make_initial(1, 0.1)
        U, _ = diagnostics.spectrum_snapshot(params, space, initial, time=2e-5)
        result = stepper.run_simulation(stepper.ModelParams(epsilon=0.1, k=1e-5, T=2e-5), space, initial)
        self.assertAllClose(U.coefficients, result.state.U.coefficients, atol=1e-12)


class InterfaceSweepTestCase(ChdgTestCase):
    def setUp(self):
        super().setUp()
        self.params = stepper.ModelParams(epsilon=0.2, k=1e-5, T=1.0)
        self.space = self.create_space(8, 1)

    def level_set(self, epsilon, T):
        params = stepper.ModelParams(epsilon=epsilon, k=1e-5, T=T)
        return stepper.run_simulation(params, self.space, make_initial(1, epsilon)).state.U

    def testOrdering(self):
        snapshots = diagnostics.interface_sweep(self.params, 1, (0.2, 0.1), (1e-5, 0.0), 8)
        self.assertEqual(
            [(s.epsilon, s.time) for s in snapshots],
            [(0.2, 0.0), (0.2, 1e-5), (0.1, 0.0), (0.1, 1e-5)],
        )
        for snapshot in snapshots:
            self.assertEqual(snapshot.polyline.time, snapshot.time)
            self.assertGreater(len(snapshot.polyline.segments), 0)

    def testStepTimes(self):
        snapshots = diagnostics.interface_sweep(self.params, 1, (0.1,), (0.0, 2e-5), 8)
        for snapshot, T in zip(snapshots, (0.0, 2e-5)):
            averaged = operators.node_average(self.space, self.level_set(0.1, T))
            expected = extract_zero_level_set(averaged, T)
            self.assertAllClose(snapshot.polyline.segments, expected.segments, atol=1e-12)

    def testBetweenSteps(self):
        snapshot, = diagnostics.interface_sweep(self.params, 1, (0.1,), (2.5e-5,), 8)
        U2, U3 = self.level_set(0.1, 2e-5), self.level_set(0.1, 3e-5)
        blended = U2.with_coefficients(0.5 * (U2.coefficients + U3.coefficients), tag=U2.tag)
        expected = extract_zero_level_set(operators.node_average(self.space, blended), 2.5e-5)
        self.assertAllClose(snapshot.polyline.segments, expected.segments, atol=1e-12)

    def testWorkerIndependent(self):
        args = (self.params, 2, (0.2, 0.1), (0.0, 1.5e-5), 8)
        serial = diagnostics.interface_sweep(*args, workers=1)
        pooled = diagnostics.interface_sweep(*args, workers=2)
        self.assertEqual(len(serial), len(pooled))
        for a, b in zip(serial, pooled):
            self.assertEqual((a.epsilon, a.time), (b.epsilon, b.time))
            self.assertAllClose(a.polyline.segments, b.polyline.segments, atol=0.0)

    def testValidation(self):
        for args in (
            ((), (0.0,)), ((0.1,), ()), ((0.0,), (0.0,)), ((0.1,), (-1e-5,)),
        ):
            with self.assertRaises(ConfigError):
                diagnostics.interface_sweep(self.params, 1, *args, 4)
        with self.assertRaises(ConfigError):
            diagnostics.interface_sweep(
                stepper.ModelParams(epsilon=0.1, k=1e-5, T=1.0, degree=2), 1, (0.1,), (0.0,), 4,
            )


class NodeAverageRatioTestCase(ChdgTestCase):
    def testBounded(self):
        ratios = []
        for n in (2, 4, 8):
            space = self.create_space(n, 1)
            ratios.append(diagnostics.node_average_ratio(self.random_field(space)))
        self.assertGreater(min(ratios), 0.0)
        self.assertLessEqual(max(ratios), 4.0 * min(ratios))

    def testZero(self):
        space = self.create_space(3, 1)
        self.assertEqual(diagnostics.node_average_ratio(dg.zero_field(space)), 0.0)


class MassReportTestCase(ChdgTestCase):
    def testWithinTolerance(self):
        with self.assertLogs('chdg.diagnostics', 'INFO') as cm:
            report = diagnostics.measured_mass_report(1, -3.0)
        self.assertTrue(report.within_tolerance)
        self.assertAlmostEqual(report.deviation, 0.064, delta=1e-12)
        self.assertIn('published 3.064', cm.output[0])

    def testDeviation(self):
        with self.assertLogs('chdg.diagnostics', 'WARNING'):
            report = diagnostics.measured_mass_report(3, 2.0)
        self.assertFalse(report.within_tolerance)
