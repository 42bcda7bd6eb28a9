import json
import os
import shutil
import tempfile

from chdg.exceptions import ConfigError
from chdg.forms import ConfigForm, emit_config, parse_config, parse_override
from chdg.tests.base import ChdgTestCase

BASE = {'k': 1e-3, 'T': 0.01, 'n': 10}


class ConfigTestCase(ChdgTestCase):
    def setUp(self):
        super().setUp()
        self.directory = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.directory)

    def write_config(self, data, name='config.json'):
        path = os.path.join(self.directory, name)
        with open(path, 'w') as f:
            f.write(data if isinstance(data, str) else json.dumps(data))
        return path

    def assertConfigErrors(self, data, *fragments, **kwargs):
        with self.assertRaises(ConfigError) as cm:
            parse_config(data=data, **kwargs)
        text = '\n'.join(cm.exception.errors)
        for fragment in fragments:
            self.assertIn(fragment, text)
        return cm.exception.errors


class ConfigFormTestCase(ConfigTestCase):
    def testDefaults(self):
        config = parse_config(data=BASE)
        self.assertEqual(config.epsilon, 0.1)
        self.assertEqual(config.sigma0, 20.0)
        self.assertEqual(config.degree, 1)
        self.assertEqual(config.scheme, 'splitting')
        self.assertEqual(config.newton_tol, 1e-10)
        self.assertEqual(config.newton_max_iter, 50)
        self.assertEqual(config.init_projection, 'l2_continuous')
        self.assertEqual(config.test_case, 1)
        self.assertEqual(config.dump_every, 10)
        self.assertEqual(config.output_dir, 'output')
        self.assertIsNone(config.n_list)
        self.assertEqual(parse_config(data=dict(BASE, degree=2)).sigma0, 60.0)

    def testModelParams(self):
        params = parse_config(data=dict(BASE, epsilon=0.05)).model_params(T=0.0)
        self.assertEqual(params.epsilon, 0.05)
        self.assertEqual(params.T, 0.0)
        self.assertEqual(params.sigma0, 20.0)

    def testRequired(self):
        errors = self.assertConfigErrors({}, 'k:', 'T:', 'n:')
        self.assertEqual(len(errors), 3)

    def testAllErrors(self):
        errors = self.assertConfigErrors(
            {'k': -1, 'T': -1, 'n': 0, 'scheme': 'explicit', 'zzz': 1, 'epsilon': 0},
            "unknown key 'zzz'", 'k must be positive', 'T must not be negative',
            'epsilon must be positive', 'scheme:', 'n:',
        )
        self.assertEqual(len(errors), 6)

    def testImplicitWarning(self):
        data = dict(BASE, scheme='implicit', k=0.01)
        with self.assertLogs('chdg.forms', 'WARNING') as cm:
            parse_config(data=data)
        self.assertIn('k exceeds epsilon^3', cm.output[0])
        self.assertConfigErrors(data, 'k exceeds epsilon^3', strict=True)
        parse_config(data=dict(BASE, scheme='implicit', k=1e-4), strict=True)

    def testTestCase(self):
        self.assertEqual(parse_config(data=dict(BASE, test_case='3')).test_case, 3)
        self.assertConfigErrors(dict(BASE, test_case=4), 'test_case must be one of')
        self.assertConfigErrors(dict(BASE, test_case='custom'), 'custom test case needs')
        config = parse_config(data=dict(BASE, test_case='custom', custom_interface='circle:0,0,0.4'))
        self.assertAlmostEqual(float(config.initial_condition().distance(0.4, 0.0)), 0.0)
        self.assertConfigErrors(
            dict(BASE, test_case='custom', custom_interface='square:1'), 'unknown shape',
        )

    def testNList(self):
        config = parse_config(data=dict(BASE, n_list=[5, 10, 20]))
        self.assertEqual(config.n_list, (5, 10, 20))
        self.assertEqual(config.reference_n, 40)
        self.assertEqual(parse_config(data=dict(BASE, n_list='5,10')).n_list, (5, 10))
        self.assertConfigErrors(dict(BASE, n_list=[5, 10], reference_n=30), 'reference_n must be')
        self.assertConfigErrors(dict(BASE, n_list=[5, 8]), 'n_list must be increasing')
        self.assertConfigErrors(dict(BASE, n_list=[5, 'x']), 'whole numbers')

    def testSweepLists(self):
        config = parse_config(data=dict(BASE, epsilon_list=[0.2, 0.1], sweep_times='0, 1e-5'))
        self.assertEqual(config.epsilon_list, (0.2, 0.1))
        self.assertEqual(config.sweep_times, (0.0, 1e-5))
        self.assertIsNone(parse_config(data=dict(BASE)).epsilon_list)
        self.assertConfigErrors(dict(BASE, epsilon_list=[0.1, 0.0]), 'epsilon_list entries must be positive')
        self.assertConfigErrors(dict(BASE, sweep_times=[-1e-5]), 'sweep_times must not be negative')
        self.assertConfigErrors(dict(BASE, epsilon_list='0.1,abc'), 'Enter a list of numbers')

    def testStrictKwarg(self):
        form = ConfigForm(dict(BASE), strict=True)
        self.assertTrue(form.strict)
        self.assertTrue(form.is_valid())


class ConfigFileTestCase(ConfigTestCase):
    def testFileAndOverrides(self):
        path = self.write_config(dict(BASE, epsilon=0.2))
        config = parse_config(path, ['n=20', 'scheme=implicit', 'k=1e-4', 'output_dir=out/a'])
        self.assertEqual(config.epsilon, 0.2)
        self.assertEqual(config.n, 20)
        self.assertEqual(config.scheme, 'implicit')
        self.assertEqual(config.k, 1e-4)
        self.assertEqual(config.output_dir, 'out/a')

    def testMalformedOverride(self):
        self.assertRaises(ConfigError, parse_override, 'epsilon')
        self.assertRaises(ConfigError, parse_override, '=1')
        self.assertEqual(parse_override('n_list=[5,10]'), ('n_list', [5, 10]))
        with self.assertRaises(ConfigError) as cm:
            parse_config(overrides=['bogus', 'k=-1', 'T=1', 'n=2'])
        self.assertEqual(len(cm.exception.errors), 2)

    def testMalformedFile(self):
        with self.assertRaises(ConfigError) as cm:
            parse_config(self.write_config('{"k": 1e-3,'))
        self.assertIn('malformed config file', str(cm.exception))
        self.assertRaises(ConfigError, parse_config, self.write_config('[1, 2]'))
        self.assertRaises(ConfigError, parse_config, os.path.join(self.directory, 'missing.json'))

    def testRoundTrip(self):
        path = self.write_config(dict(
            BASE, epsilon=0.05, scheme='implicit', k=1e-5, n_list=[4, 8],
            test_case='custom', custom_interface='ellipse:0.5,0.25', snapshot_time=0.1,
        ))
        config = parse_config(path)
        emitted = emit_config(config)
        self.assertNotIn('custom_interface', emit_config(parse_config(data=BASE)))
        again = parse_config(self.write_config(json.dumps(emitted), 'again.json'))
        self.assertEqual(again, config)
